// isoscope: isotropy analysis of hidden-state point clouds from the command line.
//
// Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
// Diagnostics go to stderr; data goes to files or stdout.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "isoscope/isoscope.hpp"

namespace {

using namespace isoscope;
using ojson = nlohmann::ordered_json;

bool g_verbose = false;

void log(const std::string& message) {
  if (g_verbose) std::cerr << "[isoscope] " << message << "\n";
}

std::string fixed6(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << v;
  return out.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string wall_clock_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Everything needed to rerun a command: argv, parsed config, input digests.
struct RunRecord {
  std::string subcommand;
  std::vector<std::string> argv;
  ojson config = ojson::object();
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  void add_input(const fs::path& p) { inputs.push_back(p); }
  void add_outputs(const std::vector<fs::path>& ps) {
    outputs.insert(outputs.end(), ps.begin(), ps.end());
  }

  ojson to_json() const {
    ojson j;
    j["schema"] = "isoscope.run_manifest";
    j["schema_version"] = 1;
    j["toolkit_version"] = kToolkitVersion;
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    j["config"] = config;
    j["inputs"] = ojson::array();
    for (const auto& p : inputs) {
      std::error_code ec;
      const auto size = fs::file_size(p, ec);
      j["inputs"].push_back({{"path", p.string()},
                             {"bytes", ec ? 0 : size},
                             {"sha256", ec ? std::string() : sha256_file(p)}});
    }
    std::vector<std::string> outs;
    for (const auto& p : outputs) outs.push_back(p.string());
    j["outputs"] = outs;
    j["started_at"] = wall_clock_utc();
    return j;
  }
};

void write_run_manifest(const RunRecord& run, const std::optional<fs::path>& out_dir,
                        const std::string& explicit_path) {
  const auto body = run.to_json();
  fs::path target;
  if (!explicit_path.empty()) {
    target = explicit_path;
  } else if (out_dir) {
    target = *out_dir / "run_manifest.json";
  } else {
    std::cerr << "run_manifest " << body.dump() << "\n";
    return;
  }
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write run manifest " + target.string());
  out << body.dump(2) << "\n";
}

std::vector<ReportFormat> parse_formats(const std::vector<std::string>& names) {
  std::vector<ReportFormat> out;
  for (const auto& n : names) out.push_back(parse_report_format(n));
  return out;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_csv(text)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "not a number: '" + item + "'");
    }
  }
  return out;
}

/// Records of every stream entry in a manifest, tagged with the entry's group key.
std::vector<HiddenStateRecord> load_streams(const std::vector<ManifestEntry>& entries,
                                            RunRecord& run) {
  std::vector<HiddenStateRecord> all;
  for (const auto& e : entries) {
    if (!e.path) continue;
    run.add_input(*e.path);
    auto records = read_record_stream(*e.path, e.key);
    if (e.count && *e.count != records.size()) {
      fail(ErrorKind::InvalidData, e.path->string() + ": manifest count " +
                                       std::to_string(*e.count) + " but stream has " +
                                       std::to_string(records.size()) + " records");
    }
    log("loaded " + std::to_string(records.size()) + " records from " + e.path->string());
    all.insert(all.end(), std::make_move_iterator(records.begin()),
               std::make_move_iterator(records.end()));
  }
  return all;
}

bool has_stored(const std::vector<ManifestEntry>& entries) {
  return std::any_of(entries.begin(), entries.end(),
                     [](const auto& e) { return e.stored_score.has_value(); });
}

int final_layer(const std::vector<ManifestEntry>& entries, Side side) {
  int layer = -1;
  for (const auto& e : entries) {
    if (e.key.side == side) layer = std::max(layer, e.key.layer);
  }
  if (layer < 0) {
    fail(ErrorKind::InsufficientData, "manifest has no " + std::string(to_string(side)) + " entries");
  }
  return layer;
}

template <typename Report>
void emit_all(const Report& report, const std::optional<fs::path>& out_dir,
              const std::vector<ReportFormat>& formats, RunRecord& run) {
  if (!out_dir) {
    std::cout << to_csv(report);
    return;
  }
  for (auto f : formats) run.add_outputs(emit_report(report, f, *out_dir));
}

// Shared analysis flags.
struct AnalysisFlags {
  std::string side = "dec";
  std::optional<int> layer;
  bool baselines = false;
  std::size_t pairs = kDefaultCosinePairs;
  std::uint64_t seed = 0;
  bool balanced_union = false;
  std::string out_dir;
  std::vector<std::string> formats{"json", "csv"};

  void attach(CLI::App* cmd, bool with_layer = true) {
    cmd->add_option("--side", side, "enc|dec")->check(CLI::IsMember({"enc", "dec", "encoder", "decoder"}));
    if (with_layer) cmd->add_option("--layer", layer, "layer index (default: final layer)");
    cmd->add_flag("--baselines", baselines, "also compute avg cosine and partition scores");
    cmd->add_option("--pairs", pairs, "sampled pairs for avg cosine");
    cmd->add_option("--seed", seed, "seed for sampling");
    cmd->add_flag("--balanced-union", balanced_union,
                  "subsample each target language to the smallest before pooling the union");
    cmd->add_option("--out-dir", out_dir, "output directory (default: CSV to stdout)");
    cmd->add_option("--format", formats, "json, csv and/or plotdata")->delimiter(',');
  }

  AnalysisOptions options(std::size_t workers) const {
    AnalysisOptions o;
    o.baselines = baselines;
    o.cosine_pairs = pairs;
    o.seed = seed;
    o.assemble.pooling = balanced_union ? UnionPooling::Balanced : UnionPooling::Raw;
    o.assemble.seed = seed;
    o.workers = workers;
    return o;
  }

  std::optional<fs::path> dir() const {
    return out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
  }

  ojson to_json() const {
    return {{"side", side},
            {"layer", layer ? ojson(*layer) : ojson(nullptr)},
            {"baselines", baselines},
            {"pairs", pairs},
            {"seed", seed},
            {"balanced_union", balanced_union},
            {"out_dir", out_dir},
            {"formats", formats}};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("isoscope: isotropy analysis of hidden-state point clouds", "isoscope");
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", g_verbose, "log progress to stderr");
  std::size_t workers = default_worker_count();
  app.add_option("--workers", workers, "worker threads (default: $ISOSCOPE_WORKERS or cores)");
  std::string run_manifest_path;
  app.add_option("--run-manifest", run_manifest_path, "where to write the run manifest");

  RunRecord run;
  for (int i = 0; i < argc; ++i) run.argv.emplace_back(argv[i]);

  // isoscore
  auto* iso_cmd = app.add_subcommand("isoscore", "IsoScore of one cloud (ISOB-M, ISOB-R or CSV)");
  std::string iso_input;
  bool iso_details = false;
  std::string iso_json;
  AnalysisFlags iso_flags;
  iso_cmd->add_option("--input", iso_input, "cloud file")->required();
  iso_cmd->add_flag("--details", iso_details, "print phi, delta, N, n and flags as well");
  iso_cmd->add_option("--json", iso_json, "also write the full result as JSON here");
  iso_cmd->add_flag("--baselines", iso_flags.baselines, "also compute baseline metrics");
  iso_cmd->add_option("--pairs", iso_flags.pairs, "sampled pairs for avg cosine");
  iso_cmd->add_option("--seed", iso_flags.seed, "seed for sampling");

  // spectrum
  auto* spec_cmd = app.add_subcommand("spectrum", "normalized singular-value spectra");
  std::vector<std::string> spec_inputs;
  std::vector<std::string> spec_labels;
  std::string spec_manifest;
  bool spec_raw = false;
  AnalysisFlags spec_flags;
  spec_flags.formats = {"json", "csv", "plotdata"};
  spec_cmd->add_option("--input", spec_inputs, "cloud files");
  spec_cmd->add_option("--label", spec_labels, "labels for --input files, in order");
  spec_cmd->add_option("--manifest", spec_manifest, "stream manifest (alternative to --input)");
  spec_cmd->add_flag("--raw", spec_raw, "do not mean-center before the SVD");
  spec_cmd->add_option("--side", spec_flags.side, "enc|dec (with --manifest)");
  spec_cmd->add_option("--layer", spec_flags.layer, "layer (with --manifest; default final)");
  spec_cmd->add_option("--out-dir", spec_flags.out_dir, "output directory");
  spec_cmd->add_option("--format", spec_flags.formats, "json, csv and/or plotdata")->delimiter(',');

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "multilingual vs bilingual IsoScore table");
  std::string cmp_multi;
  std::string cmp_bi;
  AnalysisFlags cmp_flags;
  cmp_cmd->add_option("--multi", cmp_multi, "multilingual manifest")->required();
  cmp_cmd->add_option("--bi", cmp_bi, "bilingual manifest")->required();
  cmp_flags.attach(cmp_cmd);

  // delta
  auto* delta_cmd = app.add_subcommand("delta", "per-language minus union IsoScore");
  std::string delta_manifest;
  AnalysisFlags delta_flags;
  delta_cmd->add_option("--manifest", delta_manifest, "multilingual manifest")->required();
  delta_flags.attach(delta_cmd);

  // layerwise
  auto* layer_cmd = app.add_subcommand("layerwise", "IsoScore per layer boundary");
  std::string layer_manifest;
  std::string layer_list;
  AnalysisFlags layer_flags;
  layer_cmd->add_option("--manifest", layer_manifest, "multilingual manifest")->required();
  layer_cmd->add_option("--layers", layer_list, "comma-separated layers (default: all)");
  layer_flags.attach(layer_cmd, false);

  // pool
  auto* pool_cmd = app.add_subcommand("pool", "mean-pool an ISOB-R stream into an ISOB-M matrix");
  std::string pool_input;
  std::string pool_output;
  std::string pool_dtype = "f32";
  pool_cmd->add_option("--input", pool_input, "ISOB-R stream")->required();
  pool_cmd->add_option("--output", pool_output, "ISOB-M (or .csv) output")->required();
  pool_cmd->add_option("--dtype", pool_dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));

  // filter-corpus
  auto* filt_cmd = app.add_subcommand("filter-corpus", "clean a line-aligned bitext");
  std::string f_src, f_tgt, f_src_lang, f_tgt_lang, f_out, f_external, f_scripts;
  std::string f_dedup = "per-pair";
  std::string f_steps = "1,2,3,4";
  corpus::FilterConfig f_config;
  filt_cmd->add_option("--src", f_src, "source-side file")->required();
  filt_cmd->add_option("--tgt", f_tgt, "target-side file")->required();
  filt_cmd->add_option("--src-lang", f_src_lang, "source language code")->required();
  filt_cmd->add_option("--tgt-lang", f_tgt_lang, "target language code")->required();
  filt_cmd->add_option("--out-dir", f_out, "output directory")->required();
  filt_cmd->add_option("--punct-max", f_config.punct_ratio_max, "max punctuation ratio");
  filt_cmd->add_option("--ratio-max", f_config.length_ratio_max, "max length ratio");
  filt_cmd->add_option("--max-tokens", f_config.max_tokens, "max tokens per side");
  filt_cmd->add_option("--script-max", f_config.script_foreign_ratio_max,
                       "max foreign-script letter ratio");
  filt_cmd->add_option("--external-verdicts", f_external, "per-line keep/drop verdict file");
  filt_cmd->add_option("--dedup", f_dedup, "per-pair|per-side")
      ->check(CLI::IsMember({"per-pair", "per-side"}));
  filt_cmd->add_option("--steps", f_steps, "enabled steps, e.g. 1,2,3,4");
  filt_cmd->add_option("--scripts", f_scripts, "JSON language->script-names table");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write seeded synthetic clouds");
  long long s_n = 0, s_N = 0;
  std::string s_profile, s_offset, s_spec, s_out, s_out_dir, s_dtype = "f32";
  std::optional<std::uint64_t> s_rotation;
  std::uint64_t s_seed = 0;
  int s_clusters = 0;
  long long s_per_cluster = 0;
  double s_separation = 0.0;
  std::string s_langs;
  std::string s_source_lang = "en";
  std::string s_dataset = "synthetic";
  synth_cmd->add_option("--n", s_n, "dimension");
  synth_cmd->add_option("--N", s_N, "observations");
  synth_cmd->add_option("--profile", s_profile, "comma-separated variances (default all ones)");
  synth_cmd->add_option("--offset", s_offset, "comma-separated offset vector");
  synth_cmd->add_option("--rotation-seed", s_rotation, "seed for a random rotation");
  synth_cmd->add_option("--seed", s_seed, "sampling seed");
  synth_cmd->add_option("--spec", s_spec, "JSON cloud spec (overrides flags)");
  synth_cmd->add_option("--out", s_out, "ISOB-M output (or .csv)");
  synth_cmd->add_option("--dtype", s_dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));
  synth_cmd->add_option("--clusters", s_clusters, "language-cluster fixture: cluster count");
  synth_cmd->add_option("--per-cluster", s_per_cluster, "rows per cluster");
  synth_cmd->add_option("--separation", s_separation, "distance between cluster means");
  synth_cmd->add_option("--langs", s_langs, "target language per cluster (comma-separated)");
  synth_cmd->add_option("--source-lang", s_source_lang, "source language for the manifest");
  synth_cmd->add_option("--dataset", s_dataset, "dataset tag for the manifest");
  synth_cmd->add_option("--out-dir", s_out_dir, "cluster fixture output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  std::optional<fs::path> manifest_dir;
  try {
    if (*iso_cmd) {
      run.subcommand = "isoscore";
      run.add_input(iso_input);
      const PointCloud cloud = read_cloud(iso_input);
      const auto result = isoscope::isoscore(cloud);
      std::optional<BaselineResult> baselines;
      if (iso_flags.baselines) baselines = compute_baselines(cloud, iso_flags.pairs, iso_flags.seed);
      const bool low = is_low_sample(cloud.size(), cloud.dim());
      if (low) std::cerr << "warning: low-sample cloud (N=" << cloud.size() << " < 10*n)\n";
      if (iso_details) {
        std::cout << "isoscore\t" << fixed6(result.score) << "\nphi\t" << fixed6(result.phi)
                  << "\ndelta\t" << fixed6(result.delta) << "\nN\t" << result.N << "\nn\t"
                  << result.n << "\nlow_sample\t" << (low ? "true" : "false") << "\n";
        if (baselines) {
          std::cout << "avg_cosine\t" << fixed6(baselines->avg_cosine) << "\npartition_score\t"
                    << fixed6(baselines->partition_score) << "\n";
        }
      } else {
        std::cout << fixed6(result.score) << "\n";
      }
      if (!iso_json.empty()) {
        ojson j;
        j["schema"] = "isoscope.isoscore";
        j["schema_version"] = kReportSchemaVersion;
        j["toolkit_version"] = kToolkitVersion;
        j["input"] = iso_input;
        j["isoscore"] = result.score;
        j["phi"] = result.phi;
        j["delta"] = result.delta;
        j["N"] = result.N;
        j["n"] = result.n;
        j["low_sample"] = low;
        if (baselines) {
          j["avg_cosine"] = baselines->avg_cosine;
          j["partition_score"] = baselines->partition_score;
        }
        std::ofstream out(iso_json, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot write " + iso_json);
        out << j.dump(2) << "\n";
        run.outputs.emplace_back(iso_json);
      }
      run.config = {{"input", iso_input}, {"baselines", iso_flags.baselines},
                    {"pairs", iso_flags.pairs}, {"seed", iso_flags.seed}};
    } else if (*spec_cmd) {
      run.subcommand = "spectrum";
      const auto centering = spec_raw ? Centering::Raw : Centering::Centered;
      SpectrumOverlay overlay;
      if (!spec_manifest.empty()) {
        run.add_input(spec_manifest);
        const auto entries = read_manifest(spec_manifest);
        const Side side = parse_side(spec_flags.side);
        const int layer = spec_flags.layer.value_or(final_layer(entries, side));
        const auto records = load_streams(entries, run);
        overlay = spectrum_overlay(records, side, layer, centering);
      } else {
        if (spec_inputs.empty()) fail(ErrorKind::InvalidArgument, "spectrum needs --input or --manifest");
        if (!spec_labels.empty() && spec_labels.size() != spec_inputs.size()) {
          fail(ErrorKind::InvalidArgument, "--label count must match --input count");
        }
        std::vector<std::pair<std::string, PointCloud>> clouds;
        for (std::size_t i = 0; i < spec_inputs.size(); ++i) {
          run.add_input(spec_inputs[i]);
          const std::string label =
              spec_labels.empty() ? fs::path(spec_inputs[i]).stem().string() : spec_labels[i];
          clouds.emplace_back(label, read_cloud(spec_inputs[i]));
        }
        overlay = spectrum_overlay(clouds, centering);
      }
      for (const auto& e : overlay.entries) {
        std::cerr << e.label << ": min/max=" << fixed6(e.min_max_ratio)
                  << " entropy=" << fixed6(e.spectral_entropy) << "\n";
      }
      manifest_dir = spec_flags.dir();
      emit_all(overlay, manifest_dir, parse_formats(spec_flags.formats), run);
      run.config = spec_flags.to_json();
      run.config["centered"] = !spec_raw;
      run.config["inputs"] = spec_inputs;
      run.config["labels"] = spec_labels;
      run.config["manifest"] = spec_manifest;
    } else if (*cmp_cmd) {
      run.subcommand = "compare";
      run.add_input(cmp_multi);
      run.add_input(cmp_bi);
      const auto multi_entries = read_manifest(cmp_multi);
      const auto bi_entries = read_manifest(cmp_bi);
      const Side side = parse_side(cmp_flags.side);
      IsotropyReport report;
      if (has_stored(multi_entries) || has_stored(bi_entries)) {
        std::vector<ManifestEntry> all = multi_entries;
        all.insert(all.end(), bi_entries.begin(), bi_entries.end());
        const int layer = cmp_flags.layer.value_or(final_layer(all, side));
        report = compare_scores(all, side, layer);
      } else {
        const int layer = cmp_flags.layer.value_or(final_layer(multi_entries, side));
        const auto multi = load_streams(multi_entries, run);
        const auto bi = load_streams(bi_entries, run);
        report = compare_models(multi, bi, side, layer, cmp_flags.options(workers));
      }
      for (const auto& r : report.rows) {
        std::cerr << r.key.label() << "\t" << fixed6(r.iso.score)
                  << (r.higher && *r.higher ? "\t(higher)" : "") << "\n";
      }
      manifest_dir = cmp_flags.dir();
      emit_all(report, manifest_dir, parse_formats(cmp_flags.formats), run);
      run.config = cmp_flags.to_json();
      run.config["multi"] = cmp_multi;
      run.config["bi"] = cmp_bi;
    } else if (*delta_cmd) {
      run.subcommand = "delta";
      run.add_input(delta_manifest);
      const auto entries = read_manifest(delta_manifest);
      const Side side = parse_side(delta_flags.side);
      const int layer = delta_flags.layer.value_or(final_layer(entries, side));
      DeltaReport report;
      if (has_stored(entries)) {
        report = delta_from_scores(entries, side, layer);
      } else {
        const auto records = load_streams(entries, run);
        report = delta_isoscore(records, side, layer, delta_flags.options(workers));
      }
      manifest_dir = delta_flags.dir();
      if (manifest_dir) {
        for (auto f : parse_formats(delta_flags.formats)) {
          run.add_outputs(emit_report(report, f, *manifest_dir));
        }
      }
      std::cout << "side\tsource\ttarget\tiso_lang\tiso_union\tdelta\n";
      for (const auto& e : report.entries) {
        std::cout << short_name(e.side) << "\t" << e.source_lang << "\t" << e.target_lang << "\t"
                  << fixed6(e.iso_lang) << "\t" << fixed6(e.iso_union) << "\t" << fixed6(e.delta)
                  << "\n";
      }
      run.config = delta_flags.to_json();
      run.config["manifest"] = delta_manifest;
    } else if (*layer_cmd) {
      run.subcommand = "layerwise";
      run.add_input(layer_manifest);
      const auto entries = read_manifest(layer_manifest);
      std::vector<int> layers;
      for (const auto& item : split_csv(layer_list)) {
        try {
          layers.push_back(std::stoi(item));
        } catch (const std::exception&) {
          fail(ErrorKind::InvalidArgument, "bad layer '" + item + "'");
        }
      }
      const auto records = load_streams(entries, run);
      const auto report = layerwise_isotropy(records, parse_side(layer_flags.side), layers,
                                             layer_flags.options(workers));
      manifest_dir = layer_flags.dir();
      emit_all(report, manifest_dir, parse_formats(layer_flags.formats), run);
      run.config = layer_flags.to_json();
      run.config["manifest"] = layer_manifest;
      run.config["layers"] = layers;
    } else if (*pool_cmd) {
      run.subcommand = "pool";
      run.add_input(pool_input);
      const auto cloud = pool_record_stream(pool_input);
      if (fs::path(pool_output).extension() == ".csv") {
        write_csv(pool_output, cloud);
      } else {
        write_matrix(pool_output, cloud, pool_dtype == "f64" ? DType::F64 : DType::F32);
      }
      run.outputs.emplace_back(pool_output);
      manifest_dir = fs::absolute(pool_output).parent_path();
      std::cerr << "pooled " << cloud.size() << " x " << cloud.dim() << " -> " << pool_output << "\n";
      run.config = {{"input", pool_input}, {"output", pool_output}, {"dtype", pool_dtype}};
    } else if (*filt_cmd) {
      run.subcommand = "filter-corpus";
      run.add_input(f_src);
      run.add_input(f_tgt);
      f_config.dedup_mode =
          f_dedup == "per-side" ? corpus::DedupMode::PerSide : corpus::DedupMode::PerPair;
      f_config.enabled_steps.clear();
      for (const auto& s : split_csv(f_steps)) {
        const int v = std::atoi(s.c_str());
        if (v < 1 || v > 4) fail(ErrorKind::InvalidArgument, "steps must be in 1..4, got '" + s + "'");
        f_config.enabled_steps.insert(static_cast<corpus::Step>(v));
      }
      auto scripts = corpus::default_script_table();
      if (!f_scripts.empty()) {
        run.add_input(f_scripts);
        for (auto& [lang, set] : corpus::script_table_from_json(read_json_file(f_scripts))) {
          scripts[lang] = set;
        }
      }
      std::optional<std::vector<corpus::ExternalVerdict>> external;
      if (!f_external.empty()) {
        run.add_input(f_external);
        external = corpus::read_external_verdicts(f_external);
      }
      const corpus::LanguagePair langs{f_src_lang, f_tgt_lang};
      const auto result = corpus::run_pipeline(corpus::read_lines(f_src), corpus::read_lines(f_tgt),
                                               f_config, langs, corpus::whitespace_punct_tokens,
                                               scripts, external ? &*external : nullptr);
      const auto paths = corpus::write_pipeline_outputs(result, f_config, langs, f_out);
      run.add_outputs({paths.kept_src, paths.kept_tgt, paths.rejected, paths.stats});
      manifest_dir = fs::path(f_out);
      std::cerr << "kept " << result.stats.kept << " of " << result.stats.input_pairs << " pairs\n";
      run.config = nlohmann::ordered_json::parse(corpus::stats_json(result.stats, f_config, langs))["config"];
      run.config["src"] = f_src;
      run.config["tgt"] = f_tgt;
      run.config["external_verdicts"] = f_external;
      run.config["scripts"] = f_scripts;
    } else if (*synth_cmd) {
      run.subcommand = "synth";
      const DType dtype = s_dtype == "f64" ? DType::F64 : DType::F32;
      if (s_clusters > 0) {
        if (s_out_dir.empty()) fail(ErrorKind::InvalidArgument, "--clusters needs --out-dir");
        if (s_n < 1 || s_per_cluster < 1) {
          fail(ErrorKind::InvalidArgument, "--clusters needs --n and --per-cluster");
        }
        auto langs = split_csv(s_langs);
        if (langs.empty()) {
          for (int c = 0; c < s_clusters; ++c) langs.push_back("l" + std::to_string(c));
        }
        if (static_cast<int>(langs.size()) != s_clusters) {
          fail(ErrorKind::InvalidArgument, "--langs must name one language per cluster");
        }
        const auto labeled =
            generate_language_clusters(s_clusters, s_per_cluster, s_n, s_separation, s_seed);
        const fs::path dir(s_out_dir);
        fs::create_directories(dir);
        ojson manifest;
        manifest["streams"] = ojson::array();
        for (int c = 0; c < s_clusters; ++c) {
          const auto rows = cluster_rows(labeled, c);
          std::vector<HiddenStateRecord> records;
          for (Eigen::Index i = 0; i < rows.size(); ++i) {
            records.push_back({static_cast<std::uint64_t>(i), rows.matrix().row(i), {}});
          }
          GroupKey key{ModelType::Multilingual, s_dataset, s_source_lang,
                       langs[static_cast<std::size_t>(c)], Side::Decoder, 0};
          const std::string file = s_source_lang + "-" + key.target_lang + ".dec.L0.isobr";
          write_record_stream(dir / file, records, static_cast<std::uint32_t>(s_n), dtype);
          write_stream_sidecar(dir / (file + ".json"), key, records.size());
          auto entry = to_json(key);
          entry["path"] = file;
          entry["count"] = records.size();
          manifest["streams"].push_back(entry);
          run.outputs.push_back(dir / file);
        }
        const auto manifest_path = dir / "manifest.json";
        std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot write " + manifest_path.string());
        out << manifest.dump(2) << "\n";
        run.outputs.push_back(manifest_path);
        manifest_dir = dir;
      } else {
        if (s_out.empty()) fail(ErrorKind::InvalidArgument, "synth needs --out");
        CloudSpec spec;
        if (!s_spec.empty()) {
          run.add_input(s_spec);
          spec = cloud_spec_from_json(read_json_file(s_spec));
        } else {
          spec.n = s_n;
          spec.N = s_N;
          spec.variance_profile = s_profile.empty()
                                      ? std::vector<double>(static_cast<std::size_t>(std::max(s_n, 0LL)), 1.0)
                                      : parse_doubles(s_profile);
          spec.rotation_seed = s_rotation;
          if (!s_offset.empty()) spec.offset = parse_doubles(s_offset);
          spec.sample_seed = s_seed;
        }
        const auto cloud = generate_gaussian(spec);
        if (fs::path(s_out).extension() == ".csv") {
          write_csv(s_out, cloud);
        } else {
          write_matrix(s_out, cloud, dtype);
        }
        run.outputs.emplace_back(s_out);
        manifest_dir = fs::absolute(s_out).parent_path();
      }
      run.config = {{"n", s_n}, {"N", s_N}, {"profile", s_profile}, {"offset", s_offset},
                    {"rotation_seed", s_rotation ? ojson(*s_rotation) : ojson(nullptr)},
                    {"seed", s_seed}, {"spec", s_spec}, {"dtype", s_dtype},
                    {"clusters", s_clusters}, {"per_cluster", s_per_cluster},
                    {"separation", s_separation}, {"langs", s_langs}, {"out", s_out},
                    {"out_dir", s_out_dir}};
    }
    run.config["workers"] = workers;
    write_run_manifest(run, manifest_dir, run_manifest_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_io() ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
