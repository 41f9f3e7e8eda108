#include "sqg/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include "sqg/error.hpp"

namespace sqg {

namespace {

constexpr std::array<Category, kNumCategories> kCatalog = {{
    {Label::kFelonyCrimes, "felony_crimes", Group::kLegal, "Felony crimes",
     "Promotes or prepares serious criminal acts such as assault, fraud, or drug dealing.",
     "This request was not answered because it may assist a serious crime."},
    {Label::kAgeRestricted, "age_restricted", Group::kLegal, "Age-restricted contents",
     "Seeks adult-rated material unsuitable for minors.",
     "This request was not answered because it asks for age-restricted content."},
    {Label::kPrivacy, "privacy", Group::kLegal, "Privacy",
     "Could expose personal data of a specific individual, such as an address or phone number.",
     "This request was not answered because it may expose someone's personal information."},
    {Label::kCopyright, "copyright", Group::kLegal, "Minor copyright infringement",
     "Seeks unauthorized access to copyrighted works.",
     "This request was not answered because it may lead to copyright infringement."},
    {Label::kDiscrimination, "discrimination", Group::kEthical, "Discrimination",
     "Promotes, justifies, or incites hatred against a group or its members.",
     "This request was not answered because it may promote discrimination or hatred."},
    {Label::kSuicideSelfHarm, "suicide_self_harm", Group::kEthical, "Suicide and self-harm",
     "Seeks guidance or expresses intent that could lead to self-harm.",
     "This request was not answered. If you are struggling, please reach out to a crisis line."},
    {Label::kProfanity, "profanity", Group::kEthical, "Profanity",
     "Contains or requests offensive language or insults.",
     "This request was not answered because it contains or requests offensive language."},
    {Label::kPersonification, "personification", Group::kEthical, "Personification of system",
     "Treats the system as a person or asks it to act beyond its capabilities.",
     "This request was not answered because it asks the service to act as a person."},
    {Label::kHighStakes, "high_stakes", Group::kServiceSensitive, "High-stakes domains",
     "Medical, legal, or similar questions that need authoritative professional advice.",
     "This request was not answered because it needs professional medical or legal advice."},
    {Label::kFuturePrediction, "future_prediction", Group::kServiceSensitive, "Future prediction",
     "Asks for speculative forecasts such as prices or outcomes of events.",
     "This request was not answered because it asks for a speculative prediction."},
    {Label::kControversialFactuality, "controversial_factuality", Group::kServiceSensitive,
     "Controversial factuality",
     "Asks to settle facts that are disputed along cultural, national, or belief lines.",
     "This request was not answered because it concerns a disputed topic."},
    {Label::kErrorInducing, "error_inducing", Group::kServiceSensitive, "Error-inducing",
     "Nonsensical premises or injection attempts meant to elicit wrong output.",
     "This request was not answered because it may lead to an unreliable answer."},
    {Label::kSafe, "safe", Group::kNone, "Safe", "Not sensitive.", ""},
}};

ReferenceDistribution make_reference() {
  ReferenceDistribution d;
  const std::array<double, kNumSensitive> avg = {9.9, 4.9, 1.9,  4.3, 36.1, 1.6,
                                                 2.4, 12.2, 0.1, 7.9, 17.8, 1.1};
  const std::array<double, kNumSensitive> max = {17.6, 11.6, 5.1, 10.7, 45.5, 17.2,
                                                 5.3,  18.2, 0.4, 15.8, 32.3, 3.8};
  for (std::size_t i = 0; i < kNumSensitive; ++i) {
    d.avg[i] = avg[i];
    d.max[i] = max[i];
  }
  d.avg_is_upper_bound[ordinal(Label::kHighStakes)] = true;
  return d;
}

}  // namespace

Label label_from_ordinal(int ord) {
  if (ord < 0 || ord >= static_cast<int>(kNumCategories)) {
    throw Error(ErrorCode::kUnknownCategory, "ordinal " + std::to_string(ord));
  }
  return static_cast<Label>(ord);
}

std::span<const Category, kNumCategories> category_catalog() { return kCatalog; }

const Category& category(Label label) { return kCatalog[static_cast<std::size_t>(label)]; }

std::string_view category_id(Label label) { return category(label).id; }

std::string_view group_name(Group group) {
  switch (group) {
    case Group::kLegal: return "Legal";
    case Group::kEthical: return "Ethical";
    case Group::kServiceSensitive: return "ServiceSensitive";
    case Group::kNone: return "None";
  }
  return "None";
}

const Category& parse_category(std::string_view id) {
  for (const auto& c : kCatalog) {
    if (c.id == id) return c;
  }
  throw Error(ErrorCode::kUnknownCategory, "'" + std::string(id) + "'");
}

Label parse_label(std::string_view id) { return parse_category(id).label; }

double ReferenceDistribution::avg_of(std::string_view id) const {
  return avg[parse_category(id).ordinal()];
}

double ReferenceDistribution::max_of(std::string_view id) const {
  return max[parse_category(id).ordinal()];
}

const ReferenceDistribution& reference_distribution() {
  static const ReferenceDistribution kReference = make_reference();
  return kReference;
}

nlohmann::json export_taxonomy() {
  const auto& ref = reference_distribution();
  nlohmann::json categories = nlohmann::json::object();
  for (const auto& c : kCatalog) {
    nlohmann::json entry = {
        {"ordinal", c.ordinal()},
        {"group", group_name(c.group)},
        {"display_name", c.display_name},
        {"description", c.description},
        {"block_reason_template", c.block_reason_template},
    };
    if (c.sensitive()) {
      entry["reference_avg_pct"] = ref.avg[c.ordinal()];
      entry["reference_max_pct"] = ref.max[c.ordinal()];
      entry["reference_avg_is_upper_bound"] = ref.avg_is_upper_bound[c.ordinal()];
    }
    categories[std::string(c.id)] = std::move(entry);
  }
  return {{"version", kTaxonomyVersion}, {"categories", std::move(categories)}};
}

}  // namespace sqg
