#pragma once

// Rendering of analysis results as JSON, CSV tables, or plot data (one
// two-column series file per curve plus a manifest.json). Output bytes depend
// only on the report contents.

#include <cctype>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "isoscope/analysis.hpp"
#include "isoscope/formats.hpp"

namespace isoscope {

enum class ReportFormat { Json, Csv, PlotData };

inline ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "plotdata") return ReportFormat::PlotData;
  fail(ErrorKind::InvalidArgument, "unknown report format '" + std::string(text) + "'");
}

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson header(std::string_view schema, const std::string& generated_at,
                    const std::string& version) {
  ojson j;
  j["schema"] = std::string("isoscope.") + std::string(schema);
  j["schema_version"] = kReportSchemaVersion;
  j["toolkit_version"] = version;
  j["generated_at"] = generated_at;
  return j;
}

inline std::string opt_bool(const std::optional<bool>& b) {
  return b ? (*b ? "true" : "false") : "";
}

inline std::string opt_double(const std::optional<double>& d) {
  return d ? format_double(*d) : "";
}

inline std::string series_name(std::string text) {
  for (auto& c : text) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return text;
}

struct Series {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<std::string, std::string>> points;
};

inline void require_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorKind::IoError, "cannot create output directory " + dir.string());
  }
}

inline std::vector<fs::path> write_plotdata(const fs::path& dir, std::string_view kind,
                                            const std::vector<Series>& series, ojson extra) {
  require_dir(dir);
  std::vector<fs::path> written;
  ojson manifest;
  manifest["schema"] = "isoscope.plotdata";
  manifest["schema_version"] = kReportSchemaVersion;
  manifest["kind"] = std::string(kind);
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  manifest["series"] = ojson::array();
  for (const auto& s : series) {
    const std::string file = series_name(s.name) + ".dat";
    std::string body = "# " + s.x_label + "\t" + s.y_label + "\n";
    for (const auto& [x, y] : s.points) body += x + "\t" + y + "\n";
    write_file(dir / file, body);
    written.push_back(dir / file);
    manifest["series"].push_back({{"name", s.name}, {"file", file}, {"x", s.x_label},
                                  {"y", s.y_label}, {"points", s.points.size()}});
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  written.push_back(dir / "manifest.json");
  return written;
}

}  // namespace detail

// ---- isotropy report ----------------------------------------------------------

inline std::string to_json(const IsotropyReport& report) {
  auto j = detail::header("isotropy_report", report.generated_at, report.toolkit_version);
  j["rows"] = detail::ojson::array();
  for (const auto& r : report.rows) {
    auto row = to_json(r.key);
    row["N"] = r.N;
    row["n"] = r.iso.n;
    row["isoscore"] = r.iso.score;
    if (!r.stored) {
      row["phi"] = r.iso.phi;
      row["delta"] = r.iso.delta;
    }
    if (r.baselines) {
      row["avg_cosine"] = r.baselines->avg_cosine;
      row["partition_score"] = r.baselines->partition_score;
    }
    row["low_sample"] = r.low_sample;
    row["stored"] = r.stored;
    row["higher"] = r.higher ? detail::ojson(*r.higher) : detail::ojson(nullptr);
    row["multi_minus_bi"] =
        r.multi_minus_bi ? detail::ojson(*r.multi_minus_bi) : detail::ojson(nullptr);
    row["union_imbalanced"] = r.union_imbalanced;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

inline std::string to_csv(const IsotropyReport& report) {
  std::string out =
      "model_type,dataset_tag,source_lang,target_lang,side,layer,N,n,isoscore,phi,delta,"
      "avg_cosine,partition_score,low_sample,stored,higher,multi_minus_bi,union_imbalanced\n";
  for (const auto& r : report.rows) {
    const auto& k = r.key;
    out += std::string(to_string(k.model_type)) + "," + k.dataset_tag + "," + k.source_lang + "," +
           k.target_lang + "," + std::string(to_string(k.side)) + "," + std::to_string(k.layer) +
           "," + std::to_string(r.N) + "," + std::to_string(r.iso.n) + "," +
           format_double(r.iso.score) + "," + (r.stored ? "" : format_double(r.iso.phi)) + "," +
           (r.stored ? "" : format_double(r.iso.delta)) + "," +
           (r.baselines ? format_double(r.baselines->avg_cosine) : "") + "," +
           (r.baselines ? format_double(r.baselines->partition_score) : "") + "," +
           (r.low_sample ? "true" : "false") + "," + (r.stored ? "true" : "false") + "," +
           detail::opt_bool(r.higher) + "," + detail::opt_double(r.multi_minus_bi) + "," +
           (r.union_imbalanced ? "true" : "false") + "\n";
  }
  return out;
}

inline std::vector<detail::Series> to_series(const IsotropyReport& report) {
  std::map<std::string, detail::Series> series;
  for (const auto& r : report.rows) {
    const std::string name = std::string(to_string(r.key.model_type)) + "_" +
                             std::string(short_name(r.key.side)) + "_L" +
                             std::to_string(r.key.layer);
    auto& s = series[name];
    s.name = name;
    s.x_label = "pair";
    s.y_label = "isoscore";
    s.points.emplace_back(r.key.source_lang + "-" + r.key.target_lang, format_double(r.iso.score));
  }
  std::vector<detail::Series> out;
  for (auto& [name, s] : series) out.push_back(std::move(s));
  return out;
}

// ---- delta report -------------------------------------------------------------

inline std::string to_json(const DeltaReport& report) {
  auto j = detail::header("delta_report", report.generated_at, report.toolkit_version);
  j["convention"] = "delta = isoscore(language) - isoscore(union)";
  j["entries"] = detail::ojson::array();
  for (const auto& e : report.entries) {
    j["entries"].push_back({{"dataset_tag", e.dataset_tag},
                            {"source_lang", e.source_lang},
                            {"side", std::string(to_string(e.side))},
                            {"target_lang", e.target_lang},
                            {"iso_lang", e.iso_lang},
                            {"iso_union", e.iso_union},
                            {"delta", e.delta}});
  }
  return j.dump(2) + "\n";
}

inline std::string to_csv(const DeltaReport& report) {
  std::string out = "dataset_tag,source_lang,side,target_lang,iso_lang,iso_union,delta\n";
  for (const auto& e : report.entries) {
    out += e.dataset_tag + "," + e.source_lang + "," + std::string(to_string(e.side)) + "," +
           e.target_lang + "," + format_double(e.iso_lang) + "," + format_double(e.iso_union) +
           "," + format_double(e.delta) + "\n";
  }
  return out;
}

/// Bar-plot data: a single series with one line per (side, language).
inline std::vector<detail::Series> to_series(const DeltaReport& report) {
  detail::Series s{"delta_isoscore", "side:language", "delta", {}};
  for (const auto& e : report.entries) {
    s.points.emplace_back(std::string(short_name(e.side)) + ":" + e.source_lang + "-" +
                              e.target_lang,
                          format_double(e.delta));
  }
  return {s};
}

// ---- layerwise ----------------------------------------------------------------

inline std::string to_json(const LayerwiseReport& report) {
  auto j = detail::header("layerwise_report", report.generated_at, report.toolkit_version);
  j["side"] = std::string(to_string(report.side));
  j["rows"] = detail::ojson::array();
  for (const auto& r : report.rows) {
    detail::ojson langs = detail::ojson::object();
    for (const auto& [lang, score] : r.per_language) langs[lang] = score;
    j["rows"].push_back({{"dataset_tag", r.dataset_tag},
                         {"source_lang", r.source_lang},
                         {"layer", r.layer},
                         {"per_language", langs},
                         {"union", r.union_score}});
  }
  return j.dump(2) + "\n";
}

inline std::string to_csv(const LayerwiseReport& report) {
  std::string out = "dataset_tag,source_lang,side,layer,target_lang,isoscore\n";
  for (const auto& r : report.rows) {
    auto line = [&](const std::string& target, double score) {
      out += r.dataset_tag + "," + r.source_lang + "," + std::string(to_string(report.side)) +
             "," + std::to_string(r.layer) + "," + target + "," + format_double(score) + "\n";
    };
    for (const auto& [lang, score] : r.per_language) line(lang, score);
    line(std::string(kUnionTarget), r.union_score);
  }
  return out;
}

inline std::vector<detail::Series> to_series(const LayerwiseReport& report) {
  std::map<std::string, detail::Series> series;
  for (const auto& r : report.rows) {
    auto add = [&](const std::string& target, double score) {
      const std::string name = r.dataset_tag.empty()
                                   ? r.source_lang + "-" + target
                                   : r.dataset_tag + "_" + r.source_lang + "-" + target;
      auto& s = series[name];
      s.name = name;
      s.x_label = "layer";
      s.y_label = "isoscore";
      s.points.emplace_back(std::to_string(r.layer), format_double(score));
    };
    for (const auto& [lang, score] : r.per_language) add(lang, score);
    add(std::string(kUnionTarget), r.union_score);
  }
  std::vector<detail::Series> out;
  for (auto& [name, s] : series) out.push_back(std::move(s));
  return out;
}

// ---- spectra ------------------------------------------------------------------

inline std::string to_json(const SpectrumOverlay& overlay) {
  auto j = detail::header("spectrum_overlay", overlay.generated_at, overlay.toolkit_version);
  j["centered"] = overlay.centered;
  j["semilog_y"] = true;
  j["entries"] = detail::ojson::array();
  for (const auto& e : overlay.entries) {
    std::vector<double> sv(e.spectrum.singular_values.begin(), e.spectrum.singular_values.end());
    std::vector<double> nv(e.spectrum.normalized.begin(), e.spectrum.normalized.end());
    j["entries"].push_back({{"label", e.label},
                            {"min_max_ratio", e.min_max_ratio},
                            {"spectral_entropy", e.spectral_entropy},
                            {"singular_values", sv},
                            {"normalized", nv}});
  }
  return j.dump(2) + "\n";
}

inline std::string to_csv(const SpectrumOverlay& overlay) {
  std::string out = "label,index,singular_value,normalized\n";
  for (const auto& e : overlay.entries) {
    for (Eigen::Index i = 0; i < e.spectrum.singular_values.size(); ++i) {
      out += e.label + "," + std::to_string(i) + "," +
             format_double(e.spectrum.singular_values(i)) + "," +
             format_double(e.spectrum.normalized(i)) + "\n";
    }
  }
  return out;
}

inline std::vector<detail::Series> to_series(const SpectrumOverlay& overlay) {
  std::vector<detail::Series> out;
  for (const auto& e : overlay.entries) {
    detail::Series s{e.label, "index", "normalized_singular_value", {}};
    for (Eigen::Index i = 0; i < e.spectrum.normalized.size(); ++i) {
      s.points.emplace_back(std::to_string(i), format_double(e.spectrum.normalized(i)));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---- emission -----------------------------------------------------------------

namespace detail {

template <typename Report>
std::vector<fs::path> emit_impl(const Report& report, ReportFormat format, const fs::path& dir,
                                std::string_view stem, ojson plot_extra = ojson::object()) {
  require_dir(dir);
  switch (format) {
    case ReportFormat::Json: {
      const auto path = dir / (std::string(stem) + ".json");
      write_file(path, to_json(report));
      return {path};
    }
    case ReportFormat::Csv: {
      const auto path = dir / (std::string(stem) + ".csv");
      write_file(path, to_csv(report));
      return {path};
    }
    case ReportFormat::PlotData:
      return write_plotdata(dir / "plotdata", stem, to_series(report), std::move(plot_extra));
  }
  return {};
}

}  // namespace detail

/// Writes the report under `dir` and returns the files written.
inline std::vector<fs::path> emit_report(const IsotropyReport& report, ReportFormat format,
                                         const fs::path& dir) {
  if (report.rows.empty()) fail(ErrorKind::InsufficientData, "report has no rows");
  return detail::emit_impl(report, format, dir, "isotropy_report");
}

inline std::vector<fs::path> emit_report(const DeltaReport& report, ReportFormat format,
                                         const fs::path& dir) {
  if (report.entries.empty()) fail(ErrorKind::InsufficientData, "delta report has no entries");
  return detail::emit_impl(report, format, dir, "delta_report",
                           {{"plot", "bar"}, {"convention", "language minus union"}});
}

inline std::vector<fs::path> emit_report(const LayerwiseReport& report, ReportFormat format,
                                         const fs::path& dir) {
  if (report.rows.empty()) fail(ErrorKind::InsufficientData, "layerwise report has no rows");
  return detail::emit_impl(report, format, dir, "layerwise_report", {{"plot", "line"}});
}

inline std::vector<fs::path> emit_report(const SpectrumOverlay& overlay, ReportFormat format,
                                         const fs::path& dir) {
  if (overlay.entries.empty()) fail(ErrorKind::InsufficientData, "spectrum overlay is empty");
  return detail::emit_impl(overlay, format, dir, "spectrum",
                           {{"plot", "line"}, {"semilog_y", true}, {"centered", overlay.centered}});
}

}  // namespace isoscope
