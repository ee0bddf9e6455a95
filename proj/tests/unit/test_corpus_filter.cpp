#include <set>
#include <sstream>

#include "support.hpp"

using namespace isoscope;
using namespace isoscope::corpus;
using test_support::data_dir;
using test_support::error_kind_of;
using test_support::slurp;
using test_support::TempDir;

namespace {

fs::path corpus_file(const std::string& name) { return data_dir() / "corpus" / name; }

std::string joined(const std::vector<CorpusPair>& pairs, bool src) {
  std::string out;
  for (const auto& p : pairs) out += (src ? p.src : p.tgt) + "\n";
  return out;
}

std::vector<std::pair<std::size_t, std::string>> expected_rejections() {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::istringstream in(slurp(corpus_file("expected_rejections.tsv")));
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    out.emplace_back(std::stoul(line.substr(0, tab)), line.substr(tab + 1));
  }
  return out;
}

const LanguagePair kEnRu{"en", "ru"};

CorpusPair pair(std::string s, std::string t) { return {std::move(s), std::move(t), {}}; }

}  // namespace

TEST(CorpusChars, Utf8Decoding) {
  EXPECT_EQ(decode_utf8("aж中").size(), 3u);
  const auto bad = decode_utf8(std::string("a\xff" "b"));
  ASSERT_EQ(bad.size(), 3u);
  EXPECT_EQ(bad[1], 0xFFFD);
}

TEST(CorpusChars, Classes) {
  EXPECT_TRUE(is_punctuation(U'!'));
  EXPECT_TRUE(is_punctuation(U'«'));
  EXPECT_TRUE(is_punctuation(U'—'));
  EXPECT_TRUE(is_punctuation(U'。'));
  EXPECT_FALSE(is_punctuation(U'$'));  // symbol, not punctuation
  EXPECT_TRUE(is_space(U' '));
  EXPECT_TRUE(is_letter(U'ж'));
  EXPECT_EQ(script_of(U'ж'), USCRIPT_CYRILLIC);
  EXPECT_EQ(script_of(U'a'), USCRIPT_LATIN);
  EXPECT_EQ(script_of(U'中'), USCRIPT_HAN);
}

TEST(CorpusPunctuation, RatioAndBoundary) {
  EXPECT_DOUBLE_EQ(punctuation_ratio("Hi!!!!!"), 5.0 / 7.0);
  EXPECT_DOUBLE_EQ(punctuation_ratio("Ok.."), 0.5);
  EXPECT_DOUBLE_EQ(punctuation_ratio("   "), 0.0);
  const FilterConfig cfg;
  EXPECT_TRUE(filter_punctuation(pair("Ok..", "Хорошо."), cfg).pass);
  const auto v = filter_punctuation(pair("Fine.", "!!!"), cfg);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.step, Step::Punctuation);
  EXPECT_NE(v.reason.find("tgt"), std::string::npos);
}

TEST(CorpusScript, ForeignRatio) {
  const auto table = default_script_table();
  const auto& ru = table.at("ru");
  EXPECT_DOUBLE_EQ(foreign_script_ratio("abc где", ru), 0.5);
  EXPECT_DOUBLE_EQ(foreign_script_ratio("123 !!", ru), 0.0);
  const FilterConfig cfg;
  EXPECT_TRUE(filter_script(pair("Abc def.", "abc где."), "en", "ru", cfg).pass);
  EXPECT_FALSE(filter_script(pair("A cat.", "Koshka vidit dom."), "en", "ru", cfg).pass);
  EXPECT_FALSE(filter_script(pair("Привет мир.", "Привет."), "en", "ru", cfg).pass);
  EXPECT_EQ(error_kind_of([&] { filter_script(pair("a", "b"), "en", "xx", cfg); }),
            ErrorKind::UnknownLanguage);
}

TEST(CorpusScript, TableFromJson) {
  const auto table =
      script_table_from_json(nlohmann::json::parse(R"({"sr": ["Cyrillic", "Latin"]})"));
  EXPECT_DOUBLE_EQ(foreign_script_ratio("abc где", table.at("sr")), 0.0);
  EXPECT_EQ(error_kind_of([] {
              script_table_from_json(nlohmann::json::parse(R"({"xx": ["NotAScript"]})"));
            }),
            ErrorKind::InvalidData);
}

TEST(CorpusLength, Rules) {
  const FilterConfig cfg;
  EXPECT_EQ(whitespace_punct_tokens("Hello, world!"), 4u);
  EXPECT_EQ(whitespace_punct_tokens(""), 0u);
  const auto empty = filter_length(pair("", "Привет."), cfg);
  EXPECT_FALSE(empty.pass);
  EXPECT_EQ(empty.reason.rfind("EmptyLine", 0), 0u);
  auto words = [](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += i ? " w" : "w";
    return s;
  };
  EXPECT_TRUE(filter_length(pair(words(10), words(30)), cfg).pass);
  EXPECT_FALSE(filter_length(pair(words(10), words(31)), cfg).pass);
  EXPECT_TRUE(filter_length(pair(words(250), words(250)), cfg).pass);
  EXPECT_FALSE(filter_length(pair(words(251), words(250)), cfg).pass);
  // A custom tokenizer replaces the default.
  const Tokenizer chars = [](std::string_view s) { return s.size(); };
  EXPECT_FALSE(filter_length(pair("ab", "abcdefgh"), cfg, chars).pass);
}

TEST(CorpusDedup, Modes) {
  const std::vector<CorpusPair> pairs{pair("a", "x"), pair("a", "x"), pair("a", "y"),
                                      pair("b", "y")};
  EXPECT_EQ(deduplicate(pairs).size(), 3u);
  const auto per_side = deduplicate(pairs, DedupMode::PerSide);
  // (a, y) repeats a kept source; (b, y) is new on both sides.
  ASSERT_EQ(per_side.size(), 2u);
  EXPECT_EQ(per_side[0].tgt, "x");
  EXPECT_EQ(per_side[1].src, "b");
}

TEST(CorpusPipeline, GoldenFixture) {
  const auto src = read_lines(corpus_file("input.en"));
  const auto tgt = read_lines(corpus_file("input.ru"));
  ASSERT_EQ(src.size(), 200u);
  const auto result = run_pipeline(src, tgt, FilterConfig{}, kEnRu);
  EXPECT_EQ(joined(result.kept, true), slurp(corpus_file("expected_kept.en")));
  EXPECT_EQ(joined(result.kept, false), slurp(corpus_file("expected_kept.ru")));

  std::vector<std::pair<std::size_t, std::string>> got;
  for (const auto& r : result.rejected) got.emplace_back(r.line, std::string(to_string(r.step)));
  EXPECT_EQ(got, expected_rejections());
  EXPECT_EQ(result.stats.input_pairs, 200u);
  EXPECT_EQ(result.stats.kept + result.rejected.size(), 200u);
}

TEST(CorpusPipeline, Idempotent) {
  const auto result = run_pipeline(read_lines(corpus_file("input.en")),
                                   read_lines(corpus_file("input.ru")), FilterConfig{}, kEnRu);
  std::vector<std::string> s, t;
  for (const auto& p : result.kept) {
    s.push_back(p.src);
    t.push_back(p.tgt);
  }
  const auto again = run_pipeline(s, t, FilterConfig{}, kEnRu);
  EXPECT_TRUE(again.rejected.empty());
  EXPECT_EQ(joined(again.kept, true), joined(result.kept, true));
  EXPECT_EQ(joined(again.kept, false), joined(result.kept, false));
}

TEST(CorpusPipeline, KeptIsIntersectionOfSingleStepRuns) {
  const auto src = read_lines(corpus_file("input.en"));
  const auto tgt = read_lines(corpus_file("input.ru"));
  const auto full = run_pipeline(src, tgt, FilterConfig{}, kEnRu);
  std::set<std::size_t> intersection;
  for (std::size_t i = 1; i <= src.size(); ++i) intersection.insert(i);
  for (Step step : {Step::Punctuation, Step::Dedup, Step::Script, Step::Length}) {
    FilterConfig one;
    one.enabled_steps = {step};
    const auto r = run_pipeline(src, tgt, one, kEnRu);
    const std::set<std::size_t> kept(r.kept_lines.begin(), r.kept_lines.end());
    std::erase_if(intersection, [&](std::size_t i) { return !kept.contains(i); });
  }
  EXPECT_EQ(std::vector<std::size_t>(intersection.begin(), intersection.end()), full.kept_lines);
}

TEST(CorpusPipeline, ExternalVerdictsRunLast) {
  TempDir dir("ext");
  std::ofstream(dir.path() / "v.txt") << "keep\ndrop\tlang-id says de\n0\n1\n";
  const auto verdicts = read_external_verdicts(dir.path() / "v.txt");
  ASSERT_EQ(verdicts.size(), 4u);
  EXPECT_EQ(verdicts[1].reason, "lang-id says de");
  const std::vector<std::string> s{"One cat.", "Two cats.", "!!!", "Four cats."};
  const std::vector<std::string> t{"Одна кошка.", "Две кошки.", "Три.", "Четыре кошки."};
  const auto r = run_pipeline(s, t, FilterConfig{}, kEnRu, whitespace_punct_tokens,
                              default_script_table(), &verdicts);
  ASSERT_EQ(r.rejected.size(), 2u);
  EXPECT_EQ(r.rejected[0].step, Step::External);
  EXPECT_EQ(r.rejected[0].reason, "lang-id says de");
  EXPECT_EQ(r.rejected[1].step, Step::Punctuation);  // earlier step wins
  EXPECT_EQ(r.kept_lines, (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(r.stats.removed.at(Step::External), 1u);

  const std::vector<ExternalVerdict> short_list(2);
  EXPECT_EQ(error_kind_of([&] {
              run_pipeline(s, t, FilterConfig{}, kEnRu, whitespace_punct_tokens,
                           default_script_table(), &short_list);
            }),
            ErrorKind::MisalignedBitext);
}

TEST(CorpusPipeline, Errors) {
  EXPECT_EQ(error_kind_of([] { run_pipeline({"a"}, {}, FilterConfig{}, kEnRu); }),
            ErrorKind::MisalignedBitext);
  EXPECT_EQ(error_kind_of([] { run_pipeline({"a"}, {"b"}, FilterConfig{}, {"en", "qq"}); }),
            ErrorKind::UnknownLanguage);
  FilterConfig bad;
  bad.length_ratio_max = 0.5;
  EXPECT_EQ(error_kind_of([&] { run_pipeline({"a"}, {"b"}, bad, kEnRu); }),
            ErrorKind::InvalidArgument);
}

TEST(CorpusPipeline, OutputsOnDisk) {
  TempDir dir("out");
  const auto result = run_pipeline(read_lines(corpus_file("input.en")),
                                   read_lines(corpus_file("input.ru")), FilterConfig{}, kEnRu);
  const auto paths = write_pipeline_outputs(result, FilterConfig{}, kEnRu, dir.path());
  EXPECT_EQ(slurp(paths.kept_src), slurp(corpus_file("expected_kept.en")));
  EXPECT_EQ(slurp(paths.kept_tgt), slurp(corpus_file("expected_kept.ru")));
  const auto rejected = slurp(paths.rejected);
  EXPECT_EQ(rejected.rfind("line\tstep\treason\tsrc\ttgt\n", 0), 0u);
  EXPECT_EQ(std::count(rejected.begin(), rejected.end(), '\n'),
            static_cast<long>(result.rejected.size() + 1));
  const auto stats = read_json_file(paths.stats);
  EXPECT_EQ(stats.at("input_pairs"), 200);
}

TEST(CorpusIo, ReadLinesKeepsEmptyLines) {
  TempDir dir("lines");
  std::ofstream(dir.path() / "a.txt", std::ios::binary) << "x\n\ny\n";
  EXPECT_EQ(read_lines(dir.path() / "a.txt"), (std::vector<std::string>{"x", "", "y"}));
  EXPECT_EQ(escape_tsv("a\tb\\c"), "a\\tb\\\\c");
}
