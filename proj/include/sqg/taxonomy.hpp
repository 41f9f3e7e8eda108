#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace sqg {

// Canonical ordering: twelve sensitive categories followed by safe.
enum class Label : std::uint8_t {
  kFelonyCrimes = 0,
  kAgeRestricted,
  kPrivacy,
  kCopyright,
  kDiscrimination,
  kSuicideSelfHarm,
  kProfanity,
  kPersonification,
  kHighStakes,
  kFuturePrediction,
  kControversialFactuality,
  kErrorInducing,
  kSafe,
};

inline constexpr std::size_t kNumCategories = 13;
inline constexpr std::size_t kNumSensitive = 12;

enum class Group : std::uint8_t { kLegal, kEthical, kServiceSensitive, kNone };

struct Category {
  Label label;
  std::string_view id;
  Group group;
  std::string_view display_name;
  std::string_view description;
  std::string_view block_reason_template;

  constexpr int ordinal() const { return static_cast<int>(label); }
  constexpr bool sensitive() const { return label != Label::kSafe; }
};

constexpr bool operator==(const Category& a, const Category& b) { return a.label == b.label; }

constexpr int ordinal(Label label) { return static_cast<int>(label); }
constexpr bool is_sensitive(Label label) { return label != Label::kSafe; }
Label label_from_ordinal(int ordinal);

std::span<const Category, kNumCategories> category_catalog();
const Category& category(Label label);
std::string_view category_id(Label label);
std::string_view group_name(Group group);

// Case-sensitive lookup by id; throws Error(kUnknownCategory).
const Category& parse_category(std::string_view id);
Label parse_label(std::string_view id);

// Per-category percentages indexed by ordinal (safe included, usually 0).
using CategoryShares = std::array<double, kNumCategories>;

struct ReferenceDistribution {
  CategoryShares avg{};
  CategoryShares max{};
  // Set where the published average is only an upper bound ("<0.1").
  std::array<bool, kNumCategories> avg_is_upper_bound{};

  double avg_of(std::string_view id) const;
  double max_of(std::string_view id) const;
};

const ReferenceDistribution& reference_distribution();

inline constexpr std::string_view kTaxonomyVersion = "sqg-taxonomy/1";

// Catalog plus reference distribution as one versioned document keyed by id.
nlohmann::json export_taxonomy();

}  // namespace sqg
