#include "genomebench/taxonomy.hpp"

#include <array>

namespace genomebench {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "Validation/Troubleshooting&Optimization",
    "Cloning&PlasmidConstruction",
    "GeneEditingEnzymeSelection",
    "GuideRnaDesign",
    "Screening&LibraryDesign",
    "GeneEditingDeliveryMethods",
    "PracticalLabLogistics",
};

constexpr std::array<std::string_view, 3> kDifficultyNames = {"Easy", "Medium", "Hard"};
constexpr std::array<std::string_view, 2> kSplitNames = {"train", "test"};

}  // namespace

std::string_view category_name(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }
std::string_view difficulty_name(Difficulty d) { return kDifficultyNames[static_cast<std::size_t>(d)]; }
std::string_view split_name(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

std::optional<Category> parse_category(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (name == kCategoryNames[i]) return static_cast<Category>(i);
    }
    return std::nullopt;
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
    for (std::size_t i = 0; i < kDifficultyNames.size(); ++i) {
        if (name == kDifficultyNames[i]) return static_cast<Difficulty>(i);
    }
    return std::nullopt;
}

std::optional<Split> parse_split(std::string_view name) {
    for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
        if (name == kSplitNames[i]) return static_cast<Split>(i);
    }
    return std::nullopt;
}

}  // namespace genomebench
