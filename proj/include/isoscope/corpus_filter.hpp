#pragma once

// Bitext cleaning: punctuation-heavy lines, duplicates, foreign-script lines,
// and length outliers are removed in that order. Character classes come from
// ICU (general category P* for punctuation, L* for letters, Script property
// for language membership). An external per-line verdict file can be attached
// as a final step for model-based filters.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include "isoscope/error.hpp"

namespace isoscope::corpus {

namespace fs = std::filesystem;

enum class Step { Punctuation = 1, Dedup = 2, Script = 3, Length = 4, External = 5 };

inline std::string_view to_string(Step s) {
  switch (s) {
    case Step::Punctuation: return "punctuation";
    case Step::Dedup: return "dedup";
    case Step::Script: return "script";
    case Step::Length: return "length";
    case Step::External: return "external";
  }
  return "unknown";
}

enum class DedupMode {
  PerPair,  // exact (src, tgt) repeats
  PerSide,  // a pair is dropped if either side already appeared in a kept pair
};

struct FilterConfig {
  double punct_ratio_max = 0.5;
  double length_ratio_max = 3.0;
  std::size_t max_tokens = 250;
  double script_foreign_ratio_max = 0.5;
  std::set<Step> enabled_steps{Step::Punctuation, Step::Dedup, Step::Script, Step::Length};
  DedupMode dedup_mode = DedupMode::PerPair;

  bool enabled(Step s) const { return enabled_steps.contains(s); }

  void validate() const {
    if (!(punct_ratio_max > 0.0 && punct_ratio_max <= 1.0)) {
      fail(ErrorKind::InvalidArgument, "punct_ratio_max must be in (0, 1]");
    }
    if (!(script_foreign_ratio_max > 0.0 && script_foreign_ratio_max <= 1.0)) {
      fail(ErrorKind::InvalidArgument, "script_foreign_ratio_max must be in (0, 1]");
    }
    if (!(length_ratio_max >= 1.0)) fail(ErrorKind::InvalidArgument, "length_ratio_max must be >= 1");
    if (max_tokens < 1) fail(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
  }
};

struct Verdict {
  bool pass = true;
  Step step = Step::Punctuation;
  std::string reason;
};

struct CorpusPair {
  std::string src;
  std::string tgt;
  std::vector<Verdict> verdicts;

  bool retained() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
};

// ---- character classes --------------------------------------------------------

/// Decodes UTF-8; ill-formed sequences yield U+FFFD.
inline std::vector<UChar32> decode_utf8(std::string_view text) {
  std::vector<UChar32> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    out.push_back(c < 0 ? 0xFFFD : c);
  }
  return out;
}

inline bool is_punctuation(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_P_MASK) != 0; }
inline bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }
inline bool is_letter(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_L_MASK) != 0; }

inline UScriptCode script_of(UChar32 c) {
  UErrorCode err = U_ZERO_ERROR;
  const UScriptCode code = uscript_getScript(c, &err);
  return U_SUCCESS(err) ? code : USCRIPT_INVALID_CODE;
}

/// Language code to the scripts its letters are expected in.
using ScriptTable = std::map<std::string, std::set<UScriptCode>, std::less<>>;

inline ScriptTable default_script_table() {
  const std::set<UScriptCode> latin{USCRIPT_LATIN};
  const std::set<UScriptCode> cyrillic{USCRIPT_CYRILLIC};
  ScriptTable t;
  for (const char* lang : {"en", "de", "fr", "es", "it", "pt", "nl", "cs", "pl", "ro", "tr",
                           "fi", "et", "lv", "lt", "hu", "sv", "da", "no", "is", "hr", "sl"}) {
    t[lang] = latin;
  }
  for (const char* lang : {"ru", "uk", "be", "bg", "mk", "kk", "sr"}) t[lang] = cyrillic;
  t["zh"] = {USCRIPT_HAN};
  t["ja"] = {USCRIPT_HAN, USCRIPT_HIRAGANA, USCRIPT_KATAKANA};
  t["ko"] = {USCRIPT_HANGUL, USCRIPT_HAN};
  t["el"] = {USCRIPT_GREEK};
  t["ar"] = {USCRIPT_ARABIC};
  t["he"] = {USCRIPT_HEBREW};
  return t;
}

/// Reads {"lang": ["Latin", "Cyrillic"], ...}; script names are ICU/Unicode names.
inline ScriptTable script_table_from_json(const nlohmann::json& j) {
  ScriptTable t;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::set<UScriptCode> scripts;
    for (const auto& name : it.value()) {
      const auto s = name.get<std::string>();
      const int code = u_getPropertyValueEnum(UCHAR_SCRIPT, s.c_str());
      if (code == UCHAR_INVALID_CODE) {
        fail(ErrorKind::InvalidData, "unknown script name '" + s + "' for language " + it.key());
      }
      scripts.insert(static_cast<UScriptCode>(code));
    }
    t[it.key()] = std::move(scripts);
  }
  return t;
}

/// Token counter used by the length step.
using Tokenizer = std::function<std::size_t(std::string_view)>;

/// Whitespace-separated runs, with every punctuation character its own token.
/// An approximation of subword counts when no subword model is attached.
inline std::size_t whitespace_punct_tokens(std::string_view text) {
  std::size_t tokens = 0;
  bool in_word = false;
  for (UChar32 c : decode_utf8(text)) {
    if (is_space(c)) {
      in_word = false;
    } else if (is_punctuation(c)) {
      ++tokens;
      in_word = false;
    } else if (!in_word) {
      ++tokens;
      in_word = true;
    }
  }
  return tokens;
}

// ---- per-pair steps -------------------------------------------------------------

/// Fraction of non-whitespace characters that are punctuation (0 for empty text).
inline double punctuation_ratio(std::string_view text) {
  std::size_t visible = 0;
  std::size_t punct = 0;
  for (UChar32 c : decode_utf8(text)) {
    if (is_space(c)) continue;
    ++visible;
    if (is_punctuation(c)) ++punct;
  }
  return visible == 0 ? 0.0 : static_cast<double>(punct) / static_cast<double>(visible);
}

inline Verdict filter_punctuation(const CorpusPair& pair, const FilterConfig& config) {
  for (const auto& [side, text] : {std::pair{"src", std::string_view(pair.src)},
                                   std::pair{"tgt", std::string_view(pair.tgt)}}) {
    const double ratio = punctuation_ratio(text);
    if (ratio > config.punct_ratio_max) {
      std::ostringstream reason;
      reason << side << " punctuation ratio " << ratio << " > " << config.punct_ratio_max;
      return {false, Step::Punctuation, reason.str()};
    }
  }
  return {true, Step::Punctuation, {}};
}

/// Fraction of letters whose script is outside `scripts`. Letters of the
/// Common/Inherited pseudo-scripts are not counted either way.
inline double foreign_script_ratio(std::string_view text, const std::set<UScriptCode>& scripts) {
  std::size_t letters = 0;
  std::size_t foreign = 0;
  for (UChar32 c : decode_utf8(text)) {
    if (!is_letter(c)) continue;
    const UScriptCode sc = script_of(c);
    if (sc == USCRIPT_COMMON || sc == USCRIPT_INHERITED) continue;
    ++letters;
    if (!scripts.contains(sc)) ++foreign;
  }
  return letters == 0 ? 0.0 : static_cast<double>(foreign) / static_cast<double>(letters);
}

inline const std::set<UScriptCode>& scripts_for(const ScriptTable& table, std::string_view lang) {
  const auto it = table.find(lang);
  if (it == table.end()) {
    fail(ErrorKind::UnknownLanguage, "no script set configured for language '" +
                                         std::string(lang) + "'");
  }
  return it->second;
}

inline Verdict filter_script(const CorpusPair& pair, std::string_view src_lang,
                             std::string_view tgt_lang, const FilterConfig& config,
                             const ScriptTable& table = default_script_table()) {
  const auto& src_scripts = scripts_for(table, src_lang);
  const auto& tgt_scripts = scripts_for(table, tgt_lang);
  for (const auto& [side, text, scripts] :
       {std::tuple{"src", std::string_view(pair.src), &src_scripts},
        std::tuple{"tgt", std::string_view(pair.tgt), &tgt_scripts}}) {
    const double ratio = foreign_script_ratio(text, *scripts);
    if (ratio > config.script_foreign_ratio_max) {
      std::ostringstream reason;
      reason << side << " foreign-script ratio " << ratio << " > "
             << config.script_foreign_ratio_max;
      return {false, Step::Script, reason.str()};
    }
  }
  return {true, Step::Script, {}};
}

inline Verdict filter_length(const CorpusPair& pair, const FilterConfig& config,
                             const Tokenizer& tokenizer = whitespace_punct_tokens) {
  const std::size_t src = tokenizer(pair.src);
  const std::size_t tgt = tokenizer(pair.tgt);
  if (src == 0 || tgt == 0) {
    return {false, Step::Length, std::string("EmptyLine: ") + (src == 0 ? "src" : "tgt") +
                                     " has no tokens"};
  }
  if (src > config.max_tokens || tgt > config.max_tokens) {
    return {false, Step::Length, "token count " + std::to_string(std::max(src, tgt)) + " > " +
                                     std::to_string(config.max_tokens)};
  }
  const double ratio =
      static_cast<double>(std::max(src, tgt)) / static_cast<double>(std::min(src, tgt));
  if (ratio > config.length_ratio_max) {
    std::ostringstream reason;
    reason << "length ratio " << src << ":" << tgt << " > " << config.length_ratio_max;
    return {false, Step::Length, reason.str()};
  }
  return {true, Step::Length, {}};
}

/// Keeps the first occurrence, preserving order.
inline std::vector<CorpusPair> deduplicate(const std::vector<CorpusPair>& pairs,
                                           DedupMode mode = DedupMode::PerPair) {
  std::vector<CorpusPair> out;
  std::set<std::pair<std::string, std::string>, std::less<>> seen_pairs;
  std::unordered_set<std::string> seen_src;
  std::unordered_set<std::string> seen_tgt;
  for (const auto& p : pairs) {
    if (mode == DedupMode::PerPair) {
      if (!seen_pairs.emplace(p.src, p.tgt).second) continue;
    } else {
      if (seen_src.contains(p.src) || seen_tgt.contains(p.tgt)) continue;
      seen_src.insert(p.src);
      seen_tgt.insert(p.tgt);
    }
    out.push_back(p);
  }
  return out;
}

// ---- pipeline ---------------------------------------------------------------------

/// Per-line verdict supplied from outside (e.g. a language-ID model run).
struct ExternalVerdict {
  bool keep = true;
  std::string reason;
};

struct PipelineStats {
  std::size_t input_pairs = 0;
  std::size_t kept = 0;
  std::map<Step, std::size_t> removed{{Step::Punctuation, 0},
                                      {Step::Dedup, 0},
                                      {Step::Script, 0},
                                      {Step::Length, 0},
                                      {Step::External, 0}};
};

struct Rejection {
  std::size_t line = 0;  // 1-based input line
  Step step = Step::Punctuation;
  std::string reason;
  std::string src;
  std::string tgt;
};

struct PipelineResult {
  std::vector<std::size_t> kept_lines;  // 1-based
  std::vector<CorpusPair> kept;
  std::vector<Rejection> rejected;  // in input order
  PipelineStats stats;
};

struct LanguagePair {
  std::string src;
  std::string tgt;
};

/// Applies punctuation, dedup, script, length and (when given) external verdicts
/// in that order. The first failing step is the one credited with the removal.
inline PipelineResult run_pipeline(const std::vector<std::string>& src_lines,
                                   const std::vector<std::string>& tgt_lines,
                                   const FilterConfig& config, const LanguagePair& langs,
                                   const Tokenizer& tokenizer = whitespace_punct_tokens,
                                   const ScriptTable& scripts = default_script_table(),
                                   const std::vector<ExternalVerdict>* external = nullptr) {
  config.validate();
  if (src_lines.size() != tgt_lines.size()) {
    fail(ErrorKind::MisalignedBitext, "source has " + std::to_string(src_lines.size()) +
                                          " lines, target has " + std::to_string(tgt_lines.size()));
  }
  if (external && external->size() != src_lines.size()) {
    fail(ErrorKind::MisalignedBitext, "external verdicts cover " +
                                          std::to_string(external->size()) + " lines, corpus has " +
                                          std::to_string(src_lines.size()));
  }
  if (config.enabled(Step::Script)) {
    scripts_for(scripts, langs.src);
    scripts_for(scripts, langs.tgt);
  }

  PipelineResult result;
  result.stats.input_pairs = src_lines.size();
  std::set<std::pair<std::string_view, std::string_view>> seen_pairs;
  std::set<std::string_view> seen_src;
  std::set<std::string_view> seen_tgt;

  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    CorpusPair pair{src_lines[i], tgt_lines[i], {}};
    auto reject = [&](Verdict v) {
      result.stats.removed[v.step]++;
      result.rejected.push_back(Rejection{i + 1, v.step, std::move(v.reason), pair.src, pair.tgt});
    };

    if (config.enabled(Step::Punctuation)) {
      auto v = filter_punctuation(pair, config);
      if (!v.pass) {
        reject(std::move(v));
        continue;
      }
    }
    if (config.enabled(Step::Dedup)) {
      const std::string_view s = src_lines[i];
      const std::string_view t = tgt_lines[i];
      bool duplicate = false;
      if (config.dedup_mode == DedupMode::PerPair) {
        duplicate = !seen_pairs.emplace(s, t).second;
      } else {
        duplicate = seen_src.contains(s) || seen_tgt.contains(t);
        if (!duplicate) {
          seen_src.insert(s);
          seen_tgt.insert(t);
        }
      }
      if (duplicate) {
        reject({false, Step::Dedup, "duplicate of an earlier pair"});
        continue;
      }
    }
    if (config.enabled(Step::Script)) {
      auto v = filter_script(pair, langs.src, langs.tgt, config, scripts);
      if (!v.pass) {
        reject(std::move(v));
        continue;
      }
    }
    if (config.enabled(Step::Length)) {
      auto v = filter_length(pair, config, tokenizer);
      if (!v.pass) {
        reject(std::move(v));
        continue;
      }
    }
    if (external && !(*external)[i].keep) {
      reject({false, Step::External,
              (*external)[i].reason.empty() ? "external verdict" : (*external)[i].reason});
      continue;
    }
    result.kept_lines.push_back(i + 1);
    result.kept.push_back(std::move(pair));
  }
  result.stats.kept = result.kept.size();
  return result;
}

// ---- file I/O -----------------------------------------------------------------------

/// Splits on '\n'; a trailing newline does not start an extra empty line.
inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

/// One verdict per line: "1"/"keep"/"pass" or "0"/"drop"/"fail", optionally
/// followed by a tab and a reason.
inline std::vector<ExternalVerdict> read_external_verdicts(const fs::path& path) {
  std::vector<ExternalVerdict> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    const auto tab = line.find('\t');
    const std::string head = line.substr(0, tab);
    ExternalVerdict v;
    if (head == "1" || head == "keep" || head == "pass") {
      v.keep = true;
    } else if (head == "0" || head == "drop" || head == "fail") {
      v.keep = false;
    } else {
      fail(ErrorKind::InvalidData, path.string() + ": line " + std::to_string(line_no) +
                                       " is not a verdict: '" + head + "'");
    }
    if (tab != std::string::npos) v.reason = line.substr(tab + 1);
    out.push_back(std::move(v));
  }
  return out;
}

inline std::string escape_tsv(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '\t') {
      out += "\\t";
    } else if (c == '\\') {
      out += "\\\\";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline std::string stats_json(const PipelineStats& stats, const FilterConfig& config,
                              const LanguagePair& langs) {
  nlohmann::ordered_json j;
  j["src_lang"] = langs.src;
  j["tgt_lang"] = langs.tgt;
  j["input_pairs"] = stats.input_pairs;
  j["kept"] = stats.kept;
  nlohmann::ordered_json removed;
  for (const auto& [step, count] : stats.removed) removed[std::string(to_string(step))] = count;
  j["removed"] = removed;
  nlohmann::ordered_json cfg;
  cfg["punct_ratio_max"] = config.punct_ratio_max;
  cfg["length_ratio_max"] = config.length_ratio_max;
  cfg["max_tokens"] = config.max_tokens;
  cfg["script_foreign_ratio_max"] = config.script_foreign_ratio_max;
  cfg["dedup_mode"] = config.dedup_mode == DedupMode::PerPair ? "per-pair" : "per-side";
  std::vector<std::string> steps;
  for (Step s : config.enabled_steps) steps.emplace_back(to_string(s));
  cfg["enabled_steps"] = steps;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

struct PipelineOutputs {
  fs::path kept_src;
  fs::path kept_tgt;
  fs::path rejected;
  fs::path stats;
};

/// Writes kept.<src_lang>, kept.<tgt_lang>, rejected.tsv and stats.json.
inline PipelineOutputs write_pipeline_outputs(const PipelineResult& result,
                                              const FilterConfig& config,
                                              const LanguagePair& langs, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    fail(ErrorKind::IoError, "cannot create output directory " + out_dir.string());
  }
  PipelineOutputs paths{out_dir / ("kept." + langs.src), out_dir / ("kept." + langs.tgt),
                        out_dir / "rejected.tsv", out_dir / "stats.json"};
  if (paths.kept_src == paths.kept_tgt) {
    paths.kept_src = out_dir / ("kept.src." + langs.src);
    paths.kept_tgt = out_dir / ("kept.tgt." + langs.tgt);
  }
  auto write = [](const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + p.string());
    out << body;
    if (!out) fail(ErrorKind::IoError, "write failed for " + p.string());
  };
  std::string src;
  std::string tgt;
  for (const auto& p : result.kept) {
    src += p.src + "\n";
    tgt += p.tgt + "\n";
  }
  std::string rejected = "line\tstep\treason\tsrc\ttgt\n";
  for (const auto& r : result.rejected) {
    rejected += std::to_string(r.line) + "\t" + std::string(to_string(r.step)) + "\t" +
                escape_tsv(r.reason) + "\t" + escape_tsv(r.src) + "\t" + escape_tsv(r.tgt) + "\n";
  }
  write(paths.kept_src, src);
  write(paths.kept_tgt, tgt);
  write(paths.rejected, rejected);
  write(paths.stats, stats_json(result.stats, config, langs));
  return paths;
}

}  // namespace isoscope::corpus
