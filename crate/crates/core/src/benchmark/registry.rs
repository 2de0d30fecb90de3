use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ServiceFundamentals,
    ServiceWithContext,
    UserServiceInteraction,
    Composite,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::ServiceFundamentals,
        Category::ServiceWithContext,
        Category::UserServiceInteraction,
        Category::Composite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ServiceFundamentals => "service_fundamentals",
            Category::ServiceWithContext => "service_with_context",
            Category::UserServiceInteraction => "user_service_interaction",
            Category::Composite => "composite",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Category::ServiceFundamentals => "SF",
            Category::ServiceWithContext => "SwC",
            Category::UserServiceInteraction => "USI",
            Category::Composite => "Comp",
        }
    }

    /// Number of task types in the category.
    pub fn task_count(self) -> usize {
        REGISTRY.iter().filter(|t| t.category == self).count()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.short().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// How many options a task's questions carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    /// Yes/no or two-sided polarity.
    Binary,
    /// Fixed number of options, 4 to 20.
    Choice(usize),
    /// One option per configured distance bucket.
    DistanceBuckets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TaskType {
    pub id: &'static str,
    pub name: &'static str,
    pub category: Category,
    pub arity: Arity,
}

impl TaskType {
    /// Expected option count; distance tasks depend on the bucket edges.
    pub fn option_count(&self, distance_buckets: usize) -> usize {
        match self.arity {
            Arity::Binary => 2,
            Arity::Choice(n) => n,
            Arity::DistanceBuckets => distance_buckets,
        }
    }
}

const fn task(id: &'static str, name: &'static str, category: Category, arity: Arity) -> TaskType {
    TaskType { id, name, category, arity }
}

use Arity::{Binary, Choice};
use Category::{Composite, ServiceFundamentals as SF, ServiceWithContext as SWC, UserServiceInteraction as USI};

pub const REGISTRY: [TaskType; 41] = [
    task("category_prediction", "Category Prediction", SF, Choice(4)),
    task("attribute_mining", "Attribute Mining", SF, Choice(4)),
    task("attribute_value_extraction", "Attribute Value Extraction", SF, Choice(4)),
    task("multi_level_category_prediction", "Multi-level Category Prediction", SF, Choice(4)),
    task("category_based_merchant_selection", "Category-based Merchant Selection", SF, Choice(4)),
    task("attribute_based_category_selection", "Attribute-based Category Selection", SF, Choice(4)),
    task("same_category_judgment", "Same-category Judgment", SF, Binary),
    task("same_category_selection", "Same-category Selection", SF, Choice(4)),
    task("attribute_value_reasonableness", "Attribute Value Reasonableness", SF, Binary),
    task("attribute_value_identification", "Attribute Value Identification", SF, Choice(4)),
    task("attribute_value_synonym_detection", "Attribute Value Synonym Detection", SF, Binary),
    task("attribute_value_containment", "Attribute Value Containment", SF, Binary),
    task("attribute_compatibility", "Attribute Compatibility", SF, Binary),
    task("mathematical_operations", "Mathematical Operations", SF, Choice(4)),
    task("function_tag_prediction", "Function Tag Prediction", SF, Choice(4)),
    task("brand_positioning", "Brand Positioning", SF, Binary),
    task("brand_similarity", "Brand Similarity", SF, Choice(4)),
    task("category_complementarity", "Category Complementarity", SF, Choice(4)),
    task("weather_impact_qualitative", "Weather Impact (Qualitative)", SWC, Binary),
    task("weather_impact_quantitative", "Weather Impact (Quantitative)", SWC, Choice(4)),
    task("seasonal_impact_qualitative", "Seasonal Impact (Qualitative)", SWC, Choice(4)),
    task("seasonal_impact_quantitative", "Seasonal Impact (Quantitative)", SWC, Choice(4)),
    task("nearest_merchant_selection", "Nearest Merchant Selection", SWC, Choice(4)),
    task("distance_estimation", "Distance Estimation", SWC, Arity::DistanceBuckets),
    task("administrative_division", "Administrative Division", SWC, Choice(4)),
    task("business_district_identification", "Business District Identification", SWC, Choice(10)),
    task("operating_hours_prediction", "Operating Hours Prediction", SWC, Choice(4)),
    task("peak_hours_prediction", "Peak Hours Prediction", SWC, Choice(4)),
    task("target_group_identification", "Target Group Identification", USI, Choice(4)),
    task("user_preference_prediction", "User Preference Prediction", USI, Choice(4)),
    task("review_information_points", "Review Information Points", USI, Choice(4)),
    task("review_guidance_value", "Review Guidance Value", USI, Binary),
    task("review_colloquialism", "Review Colloquialism", USI, Binary),
    task("review_real_examples", "Review Real Examples", USI, Binary),
    task("review_language_appeal", "Review Language Appeal", USI, Binary),
    task("non_marketing_content", "Non-marketing Content", USI, Binary),
    task("human_written_content", "Human-written Content", USI, Binary),
    task("overall_review_usefulness", "Overall Review Usefulness", USI, Binary),
    task("recommendation", "Recommendation", Composite, Choice(4)),
    task("search", "Search", Composite, Choice(4)),
    task("content_marketing", "Content Marketing", Composite, Choice(4)),
];

pub fn task_by_id(id: &str) -> Option<&'static TaskType> {
    REGISTRY.iter().find(|t| t.id == id)
}

/// Position of a task in the registry; used for stable ordering.
pub fn task_index(id: &str) -> usize {
    REGISTRY.iter().position(|t| t.id == id).unwrap_or(usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn registry_partition() {
        let counts: Vec<usize> = Category::ALL.iter().map(|c| c.task_count()).collect();
        assert_eq!(counts, [18, 10, 10, 3]);
        let ids: BTreeSet<_> = REGISTRY.iter().map(|t| t.id).collect();
        let names: BTreeSet<_> = REGISTRY.iter().map(|t| t.name).collect();
        assert_eq!(ids.len(), 41);
        assert_eq!(names.len(), 41);
        for t in REGISTRY {
            if let Arity::Choice(n) = t.arity {
                assert!((4..=20).contains(&n));
            }
        }
    }
}
