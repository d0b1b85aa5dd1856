#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "genomebench/common.hpp"

namespace genomebench {

// The seven thematic categories questions are annotated with.
enum class Category {
    ValidationTroubleshootingOptimization,
    CloningPlasmidConstruction,
    GeneEditingEnzymeSelection,
    GuideRnaDesign,
    ScreeningLibraryDesign,
    GeneEditingDeliveryMethods,
    PracticalLabLogistics,
};

enum class Difficulty { Easy, Medium, Hard };

enum class Split { Train, Test };

std::string_view category_name(Category c);
std::string_view difficulty_name(Difficulty d);
std::string_view split_name(Split s);

std::optional<Category> parse_category(std::string_view name);
std::optional<Difficulty> parse_difficulty(std::string_view name);
std::optional<Split> parse_split(std::string_view name);

inline constexpr int kCategoryCount = 7;

}  // namespace genomebench
