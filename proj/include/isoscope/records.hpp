#pragma once

// Token-level hidden-state records, the group selector that names one
// analyzable cloud, sentence mean pooling and cloud assembly.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isoscope/geometry.hpp"

namespace isoscope {

enum class ModelType { Bilingual, Multilingual };
enum class Side { Encoder, Decoder };

inline constexpr std::string_view kUnionTarget = "UNION";

inline std::string_view to_string(ModelType m) {
  return m == ModelType::Bilingual ? "bilingual" : "multilingual";
}
inline std::string_view to_string(Side s) { return s == Side::Encoder ? "encoder" : "decoder"; }
inline std::string_view short_name(Side s) { return s == Side::Encoder ? "enc" : "dec"; }

inline ModelType parse_model_type(std::string_view text) {
  if (text == "bilingual" || text == "bi") return ModelType::Bilingual;
  if (text == "multilingual" || text == "multi") return ModelType::Multilingual;
  fail(ErrorKind::InvalidArgument, "unknown model_type '" + std::string(text) + "'");
}

inline Side parse_side(std::string_view text) {
  if (text == "encoder" || text == "enc") return Side::Encoder;
  if (text == "decoder" || text == "dec") return Side::Decoder;
  fail(ErrorKind::InvalidArgument, "unknown side '" + std::string(text) + "'");
}

/// Selector for one cloud: (model, dataset, source, target or UNION, side, layer).
/// Layer 0 is the embedding output.
struct GroupKey {
  ModelType model_type = ModelType::Bilingual;
  std::string dataset_tag;
  std::string source_lang;
  std::string target_lang;
  Side side = Side::Encoder;
  int layer = 0;

  bool is_union() const { return target_lang == kUnionTarget; }

  void validate() const {
    if (layer < 0) fail(ErrorKind::InvalidArgument, "layer must be >= 0");
    if (is_union() && model_type != ModelType::Multilingual) {
      fail(ErrorKind::InvalidArgument, "UNION target is only valid for multilingual models");
    }
  }

  std::string label() const {
    return std::string(to_string(model_type)) + "/" + dataset_tag + "/" + source_lang + "-" +
           target_lang + "/" + std::string(short_name(side)) + "/L" + std::to_string(layer);
  }

  auto operator<=>(const GroupKey&) const = default;
  bool operator==(const GroupKey&) const = default;

  GroupKey with_target(std::string target) const {
    GroupKey k = *this;
    k.target_lang = std::move(target);
    return k;
  }
};

/// One sentence's non-padding token hidden states (T x n) for one group.
struct HiddenStateRecord {
  std::uint64_t sentence_id = 0;
  Matrix tokens;
  GroupKey meta;
};

/// Arithmetic mean over the token dimension.
inline Vector mean_pool(const HiddenStateRecord& record) {
  if (record.tokens.rows() < 1) {
    fail(ErrorKind::EmptyRecord,
         "record " + std::to_string(record.sentence_id) + " has no tokens");
  }
  return record.tokens.colwise().mean().transpose();
}

/// True when `key` falls under `selector`; a UNION selector matches every target.
inline bool matches(const GroupKey& selector, const GroupKey& key) {
  return selector.model_type == key.model_type && selector.dataset_tag == key.dataset_tag &&
         selector.source_lang == key.source_lang && selector.side == key.side &&
         selector.layer == key.layer &&
         (selector.is_union() || selector.target_lang == key.target_lang);
}

enum class UnionPooling {
  Raw,       // every matching record
  Balanced,  // seeded subsample of each target down to the smallest target's count
};

struct AssembleOptions {
  UnionPooling pooling = UnionPooling::Raw;
  std::uint64_t seed = 0;
};

/// Per-target-language record counts among the records `selector` matches.
inline std::map<std::string, std::size_t> target_counts(std::span<const HiddenStateRecord> records,
                                                        const GroupKey& selector) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    if (matches(selector, r.meta)) ++counts[r.meta.target_lang];
  }
  return counts;
}

/// One mean-pooled row per matching record, ordered by (sentence_id, target_lang).
inline PointCloud assemble_cloud(std::span<const HiddenStateRecord> records,
                                 const GroupKey& selector, const AssembleOptions& options = {}) {
  std::vector<const HiddenStateRecord*> picked;
  for (const auto& r : records) {
    if (matches(selector, r.meta)) picked.push_back(&r);
  }

  if (selector.is_union() && options.pooling == UnionPooling::Balanced && !picked.empty()) {
    std::map<std::string, std::vector<const HiddenStateRecord*>> by_target;
    for (const auto* r : picked) by_target[r->meta.target_lang].push_back(r);
    std::size_t smallest = picked.size();
    for (const auto& [lang, rs] : by_target) smallest = std::min(smallest, rs.size());
    std::mt19937_64 rng(options.seed);
    picked.clear();
    for (auto& [lang, rs] : by_target) {
      std::stable_sort(rs.begin(), rs.end(), [](const auto* a, const auto* b) {
        return a->sentence_id < b->sentence_id;
      });
      std::vector<const HiddenStateRecord*> sample;
      std::sample(rs.begin(), rs.end(), std::back_inserter(sample), smallest, rng);
      picked.insert(picked.end(), sample.begin(), sample.end());
    }
  }

  if (picked.size() < 2) {
    fail(ErrorKind::InsufficientData, "selector " + selector.label() + " matches " +
                                          std::to_string(picked.size()) +
                                          " record(s); at least 2 are required");
  }
  std::stable_sort(picked.begin(), picked.end(), [](const auto* a, const auto* b) {
    if (a->sentence_id != b->sentence_id) return a->sentence_id < b->sentence_id;
    return a->meta.target_lang < b->meta.target_lang;
  });

  const Eigen::Index dim = picked.front()->tokens.cols();
  Matrix rows(static_cast<Eigen::Index>(picked.size()), dim);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (picked[i]->tokens.cols() != dim) {
      fail(ErrorKind::InvalidDimension, "records under " + selector.label() +
                                            " disagree on hidden dimension");
    }
    rows.row(static_cast<Eigen::Index>(i)) = mean_pool(*picked[i]).transpose();
  }
  return PointCloud(std::move(rows));
}

}  // namespace isoscope
