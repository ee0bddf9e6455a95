#pragma once

// Bilingual-vs-multilingual comparisons built on top of IsoScore: score tables,
// per-language minus union deltas, layerwise trajectories and spectrum overlays.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "isoscope/baselines.hpp"
#include "isoscope/formats.hpp"
#include "isoscope/isoscore.hpp"
#include "isoscope/parallel.hpp"
#include "isoscope/records.hpp"
#include "isoscope/version.hpp"

namespace isoscope {

struct AnalysisOptions {
  bool baselines = false;
  std::size_t cosine_pairs = kDefaultCosinePairs;
  std::uint64_t seed = 0;
  AssembleOptions assemble;
  std::size_t workers = 1;
};

struct IsotropyRow {
  GroupKey key;
  IsoScoreResult iso;  // only `score` is meaningful when `stored` is set
  std::optional<BaselineResult> baselines;
  Eigen::Index N = 0;
  bool low_sample = false;
  bool stored = false;
  // Against the other model type for the same language pair.
  std::optional<bool> higher;
  std::optional<double> multi_minus_bi;
  // UNION rows: per-language counts differ by more than 2x.
  bool union_imbalanced = false;
};

struct IsotropyReport {
  std::vector<IsotropyRow> rows;
  std::string generated_at;
  std::string toolkit_version = kToolkitVersion;
};

struct DeltaEntry {
  std::string dataset_tag;
  std::string source_lang;
  Side side = Side::Decoder;
  std::string target_lang;
  double iso_lang = 0.0;
  double iso_union = 0.0;
  double delta = 0.0;  // iso_lang - iso_union
};

struct DeltaReport {
  std::vector<DeltaEntry> entries;
  std::string generated_at;
  std::string toolkit_version = kToolkitVersion;
};

struct LayerRow {
  std::string dataset_tag;
  std::string source_lang;
  int layer = 0;
  std::map<std::string, double> per_language;
  double union_score = 0.0;
};

struct LayerwiseReport {
  Side side = Side::Decoder;
  std::vector<LayerRow> rows;
  std::string generated_at;
  std::string toolkit_version = kToolkitVersion;
};

struct SpectrumEntry {
  std::string label;
  Spectrum spectrum;
  double min_max_ratio = 0.0;     // smallest / largest singular value
  double spectral_entropy = 0.0;  // entropy of s_i^2 / sum s^2, divided by log(count)
};

struct SpectrumOverlay {
  std::vector<SpectrumEntry> entries;
  bool centered = true;
  std::string generated_at;
  std::string toolkit_version = kToolkitVersion;
};

/// Report timestamp: SOURCE_DATE_EPOCH when set, else the Unix epoch, so that
/// data outputs are byte-reproducible.
inline std::string report_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(env));
    } catch (const std::exception&) {
      t = 0;
    }
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

// (dataset, source, target) of a language pair, independent of model type.
using PairKey = std::tuple<std::string, std::string, std::string>;

inline PairKey pair_of(const GroupKey& k) { return {k.dataset_tag, k.source_lang, k.target_lang}; }

// Distinct concrete group keys for one side/layer, sorted.
inline std::vector<GroupKey> distinct_groups(std::span<const HiddenStateRecord> records, Side side,
                                             int layer) {
  std::set<GroupKey> keys;
  for (const auto& r : records) {
    if (r.meta.side == side && r.meta.layer == layer) keys.insert(r.meta);
  }
  return {keys.begin(), keys.end()};
}

inline std::set<int> layers_of(std::span<const HiddenStateRecord> records, Side side) {
  std::set<int> layers;
  for (const auto& r : records) {
    if (r.meta.side == side) layers.insert(r.meta.layer);
  }
  return layers;
}

inline std::set<std::uint64_t> sentence_ids(std::span<const HiddenStateRecord> records,
                                            const GroupKey& key) {
  std::set<std::uint64_t> ids;
  for (const auto& r : records) {
    if (r.meta == key) ids.insert(r.sentence_id);
  }
  return ids;
}

inline Eigen::Index stream_dim(std::span<const HiddenStateRecord> records) {
  return records.empty() ? 0 : records.front().tokens.cols();
}

inline bool imbalanced(const std::map<std::string, std::size_t>& counts) {
  if (counts.size() < 2) return false;
  std::size_t lo = counts.begin()->second;
  std::size_t hi = lo;
  for (const auto& [lang, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return hi > 2 * lo;
}

inline IsotropyRow score_group(std::span<const HiddenStateRecord> records, const GroupKey& key,
                               const AnalysisOptions& options) {
  const PointCloud cloud = assemble_cloud(records, key, options.assemble);
  IsotropyRow row;
  row.key = key;
  row.iso = isoscore(cloud);
  row.N = cloud.size();
  row.low_sample = is_low_sample(cloud.size(), cloud.dim());
  if (options.baselines) {
    row.baselines = compute_baselines(cloud, options.cosine_pairs, options.seed);
  }
  if (key.is_union()) row.union_imbalanced = imbalanced(target_counts(records, key));
  return row;
}

inline std::vector<IsotropyRow> score_groups(std::span<const HiddenStateRecord> records,
                                             const std::vector<GroupKey>& keys,
                                             const AnalysisOptions& options) {
  return parallel_map<IsotropyRow>(keys.size(), options.workers, [&](std::size_t i) {
    return score_group(records, keys[i], options);
  });
}

// Union selectors (one per model/dataset/source) over a set of concrete keys.
inline std::vector<GroupKey> union_keys(const std::vector<GroupKey>& keys) {
  std::set<GroupKey> out;
  for (const auto& k : keys) out.insert(k.with_target(std::string(kUnionTarget)));
  return {out.begin(), out.end()};
}

// Orders rows Table-2 style (per pair: multi then bi; UNION last within each
// dataset/source) and fills the higher / multi_minus_bi columns.
inline std::vector<IsotropyRow> arrange_comparison(std::vector<IsotropyRow> rows) {
  auto rank = [](const IsotropyRow& r) {
    return std::make_tuple(r.key.dataset_tag, r.key.source_lang, r.key.is_union() ? 1 : 0,
                           r.key.target_lang, r.key.model_type == ModelType::Multilingual ? 0 : 1,
                           r.key.side, r.key.layer);
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const auto& a, const auto& b) { return rank(a) < rank(b); });

  std::map<std::tuple<PairKey, Side, int>, std::pair<IsotropyRow*, IsotropyRow*>> pairs;
  for (auto& r : rows) {
    if (r.key.is_union()) continue;
    auto& slot = pairs[{pair_of(r.key), r.key.side, r.key.layer}];
    (r.key.model_type == ModelType::Multilingual ? slot.first : slot.second) = &r;
  }
  for (auto& [key, slot] : pairs) {
    auto* multi = slot.first;
    auto* bi = slot.second;
    if (!multi || !bi) continue;
    const double diff = multi->iso.score - bi->iso.score;
    multi->multi_minus_bi = diff;
    bi->multi_minus_bi = diff;
    multi->higher = multi->iso.score > bi->iso.score;
    bi->higher = bi->iso.score > multi->iso.score;
  }
  return rows;
}

inline std::string describe_ids(const std::vector<std::uint64_t>& ids) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) out += ",";
    out += std::to_string(ids[i]);
  }
  if (ids.size() > shown) out += ",... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace detail

/// Per-pair multilingual vs bilingual IsoScores for one side and layer, plus
/// UNION rows for the multilingual model. Both models must be evaluated on the
/// same sentences for every shared language pair. Roles come from the argument
/// position, so one stream set may be compared against itself.
inline IsotropyReport compare_models(std::span<const HiddenStateRecord> multi,
                                     std::span<const HiddenStateRecord> bi, Side side, int layer,
                                     const AnalysisOptions& options = {}) {
  const auto multi_keys = detail::distinct_groups(multi, side, layer);
  const auto bi_keys = detail::distinct_groups(bi, side, layer);
  if (multi_keys.empty() && bi_keys.empty()) {
    fail(ErrorKind::InsufficientData, "no streams for side " + std::string(to_string(side)) +
                                          " at layer " + std::to_string(layer));
  }
  if (!multi.empty() && !bi.empty() && detail::stream_dim(multi) != detail::stream_dim(bi)) {
    fail(ErrorKind::InvalidDimension,
         "hidden dimensions differ: multilingual n=" + std::to_string(detail::stream_dim(multi)) +
             ", bilingual n=" + std::to_string(detail::stream_dim(bi)));
  }

  for (const auto& mk : multi_keys) {
    for (const auto& bk : bi_keys) {
      if (detail::pair_of(mk) != detail::pair_of(bk)) continue;
      const auto a = detail::sentence_ids(multi, mk);
      const auto b = detail::sentence_ids(bi, bk);
      if (a == b) continue;
      std::vector<std::uint64_t> diff;
      std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                    std::back_inserter(diff));
      fail(ErrorKind::MisalignedEvaluation,
           "sentence ids differ for " + mk.source_lang + "-" + mk.target_lang +
               " between models; symmetric difference: " + detail::describe_ids(diff));
    }
  }

  auto keys = multi_keys;
  const auto unions = detail::union_keys(multi_keys);
  keys.insert(keys.end(), unions.begin(), unions.end());
  auto rows = detail::score_groups(multi, keys, options);
  auto bi_rows = detail::score_groups(bi, bi_keys, options);
  // The argument position decides the role, whatever the stream metadata says.
  for (auto& r : rows) r.key.model_type = ModelType::Multilingual;
  for (auto& r : bi_rows) r.key.model_type = ModelType::Bilingual;
  rows.insert(rows.end(), std::make_move_iterator(bi_rows.begin()),
              std::make_move_iterator(bi_rows.end()));

  IsotropyReport report;
  report.rows = detail::arrange_comparison(std::move(rows));
  report.generated_at = report_timestamp();
  return report;
}

/// Same table built from stored score values (e.g. previously published numbers).
/// Roles come from each entry's model_type.
inline IsotropyReport compare_scores(std::span<const ManifestEntry> entries, Side side, int layer) {
  std::vector<IsotropyRow> rows;
  std::map<GroupKey, double> seen;
  for (const auto& e : entries) {
    if (!e.stored_score || e.key.side != side || e.key.layer != layer) continue;
    // The same manifest may be given for both models; repeats must agree.
    const auto [it, fresh] = seen.emplace(e.key, *e.stored_score);
    if (!fresh) {
      if (it->second != *e.stored_score) {
        fail(ErrorKind::InvalidData, "conflicting stored scores for " + e.key.label());
      }
      continue;
    }
    IsotropyRow row;
    row.key = e.key;
    row.iso.score = *e.stored_score;
    row.stored = true;
    row.N = static_cast<Eigen::Index>(e.count.value_or(0));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    fail(ErrorKind::InsufficientData, "no stored scores for side " +
                                          std::string(to_string(side)) + " at layer " +
                                          std::to_string(layer));
  }
  IsotropyReport report;
  report.rows = detail::arrange_comparison(std::move(rows));
  report.generated_at = report_timestamp();
  return report;
}

namespace detail {

inline DeltaReport build_delta(const std::map<GroupKey, double>& scores, Side side) {
  // Group per (dataset, source): languages plus the union score.
  std::map<std::pair<std::string, std::string>, std::pair<std::map<std::string, double>,
                                                          std::optional<double>>>
      grouped;
  for (const auto& [key, score] : scores) {
    auto& g = grouped[{key.dataset_tag, key.source_lang}];
    if (key.is_union()) {
      g.second = score;
    } else {
      g.first[key.target_lang] = score;
    }
  }
  DeltaReport report;
  for (const auto& [ds, g] : grouped) {
    const auto& [langs, union_score] = g;
    if (langs.size() < 2) {
      fail(ErrorKind::InsufficientLanguages,
           ds.second + " (" + ds.first + ") has " + std::to_string(langs.size()) +
               " target language(s); delta needs at least 2");
    }
    if (!union_score) {
      fail(ErrorKind::InsufficientData, "no union score for " + ds.second + " (" + ds.first + ")");
    }
    for (const auto& [lang, score] : langs) {
      report.entries.push_back(
          DeltaEntry{ds.first, ds.second, side, lang, score, *union_score, score - *union_score});
    }
  }
  if (report.entries.empty()) {
    fail(ErrorKind::InsufficientLanguages, "no multilingual groups for side " +
                                               std::string(to_string(side)));
  }
  report.generated_at = report_timestamp();
  return report;
}

}  // namespace detail

/// Per target language t: Iso(X(s, t)) - Iso(X(s, union of t)). Positive values
/// mean the pooled space is less isotropic than each language's portion.
inline DeltaReport delta_isoscore(std::span<const HiddenStateRecord> multi, Side side, int layer,
                                  const AnalysisOptions& options = {}) {
  auto keys = detail::distinct_groups(multi, side, layer);
  std::erase_if(keys, [](const GroupKey& k) { return k.model_type != ModelType::Multilingual; });
  std::set<std::string> targets;
  for (const auto& k : keys) targets.insert(k.target_lang);
  if (targets.size() < 2) {
    fail(ErrorKind::InsufficientLanguages,
         "delta needs at least 2 target languages, found " + std::to_string(targets.size()));
  }
  const auto unions = detail::union_keys(keys);
  keys.insert(keys.end(), unions.begin(), unions.end());
  const auto rows = detail::score_groups(multi, keys, options);
  std::map<GroupKey, double> scores;
  for (const auto& r : rows) scores[r.key] = r.iso.score;
  return detail::build_delta(scores, side);
}

/// Delta from stored score values; the union entry uses target_lang UNION.
inline DeltaReport delta_from_scores(std::span<const ManifestEntry> entries, Side side,
                                     int layer) {
  std::map<GroupKey, double> scores;
  for (const auto& e : entries) {
    if (!e.stored_score || e.key.side != side || e.key.layer != layer) continue;
    if (e.key.model_type != ModelType::Multilingual) continue;
    scores[e.key] = *e.stored_score;
  }
  return detail::build_delta(scores, side);
}

/// Per-language and union IsoScores at each requested layer, ascending.
/// An empty `layers` selects every layer present for the side.
inline LayerwiseReport layerwise_isotropy(std::span<const HiddenStateRecord> multi, Side side,
                                          std::vector<int> layers,
                                          const AnalysisOptions& options = {}) {
  const auto present = detail::layers_of(multi, side);
  if (layers.empty()) layers.assign(present.begin(), present.end());
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  for (int l : layers) {
    if (!present.contains(l)) {
      fail(ErrorKind::MissingLayer, "no " + std::string(to_string(side)) +
                                        " streams for layer " + std::to_string(l));
    }
  }

  std::vector<GroupKey> keys;
  for (int l : layers) {
    auto concrete = detail::distinct_groups(multi, side, l);
    const auto unions = detail::union_keys(concrete);
    keys.insert(keys.end(), concrete.begin(), concrete.end());
    keys.insert(keys.end(), unions.begin(), unions.end());
  }
  const auto rows = detail::score_groups(multi, keys, options);

  std::map<std::tuple<std::string, std::string, int>, LayerRow> by_layer;
  for (const auto& r : rows) {
    auto& out = by_layer[{r.key.dataset_tag, r.key.source_lang, r.key.layer}];
    out.dataset_tag = r.key.dataset_tag;
    out.source_lang = r.key.source_lang;
    out.layer = r.key.layer;
    if (r.key.is_union()) {
      out.union_score = r.iso.score;
    } else {
      out.per_language[r.key.target_lang] = r.iso.score;
    }
  }
  LayerwiseReport report;
  report.side = side;
  for (auto& [k, row] : by_layer) report.rows.push_back(std::move(row));
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.layer, a.dataset_tag, a.source_lang) <
           std::tie(b.layer, b.dataset_tag, b.source_lang);
  });
  report.generated_at = report_timestamp();
  return report;
}

/// Flatness summary of a spectrum.
inline std::pair<double, double> spectrum_balance(const Spectrum& s) {
  const Eigen::Index k = s.singular_values.size();
  const double ratio = s.singular_values(k - 1) / s.singular_values(0);
  const Vector energy = s.singular_values.array().square();
  const double total = energy.sum();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = energy(i) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return {ratio, k > 1 ? entropy / std::log(static_cast<double>(k)) : 1.0};
}

/// Normalized spectra for several labelled clouds of equal dimension.
inline SpectrumOverlay spectrum_overlay(
    std::span<const std::pair<std::string, PointCloud>> clouds,
    Centering centering = Centering::Centered) {
  if (clouds.empty()) fail(ErrorKind::InsufficientData, "no clouds for spectrum overlay");
  const Eigen::Index dim = clouds.front().second.dim();
  SpectrumOverlay overlay;
  overlay.centered = centering == Centering::Centered;
  for (const auto& [label, cloud] : clouds) {
    if (cloud.dim() != dim) {
      fail(ErrorKind::InvalidDimension, "stream '" + label + "' has n=" +
                                            std::to_string(cloud.dim()) + ", expected " +
                                            std::to_string(dim));
    }
    SpectrumEntry entry;
    entry.label = label;
    entry.spectrum = svd_spectrum(cloud, centering);
    std::tie(entry.min_max_ratio, entry.spectral_entropy) = spectrum_balance(entry.spectrum);
    overlay.entries.push_back(std::move(entry));
  }
  overlay.generated_at = report_timestamp();
  return overlay;
}

/// Spectra for every group of the given side and layer, labelled by group.
inline SpectrumOverlay spectrum_overlay(std::span<const HiddenStateRecord> records, Side side,
                                        int layer, Centering centering = Centering::Centered,
                                        const AssembleOptions& assemble = {}) {
  std::vector<std::pair<std::string, PointCloud>> clouds;
  for (const auto& key : detail::distinct_groups(records, side, layer)) {
    clouds.emplace_back(key.label(), assemble_cloud(records, key, assemble));
  }
  return spectrum_overlay(clouds, centering);
}

}  // namespace isoscope
