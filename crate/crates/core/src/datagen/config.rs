use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::model::{
    ModeratorDeletion, SimInstant, MILLIS_PER_SECOND, SIMULATION_END, SIMULATION_START,
};

/// Generator parameters. The same configuration always yields byte-identical
/// artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct GenConfig {
    pub seed: u64,
    pub num_persons: usize,
    pub simulation_start: SimInstant,
    pub simulation_end: SimInstant,
    /// Fraction of the window after which entities go to the update stream.
    pub cutoff_fraction: f64,
    /// Minimum simulation-time separation between dependent events.
    pub t_safe_millis: i64,
    /// Power-law exponent of the target knows-degree distribution.
    pub degree_exponent: f64,
    pub min_degree: u32,
    /// Upper degree cut-off; `None` picks `min(n - 1, 4 sqrt(n))`.
    pub max_degree: Option<u32>,
    /// Share of persons that never make friends (small components).
    pub isolated_fraction: f64,
    /// 0 = uniform attachment, 1 = always attach within a shared
    /// university, country or interest.
    pub homophily_weight: f64,
    pub flashmob_count: usize,
    pub person_deletion_rate: f64,
    pub knows_deletion_rate: f64,
    pub forum_deletion_rate: f64,
    pub membership_deletion_rate: f64,
    pub post_deletion_rate: f64,
    pub comment_deletion_rate: f64,
    pub like_deletion_rate: f64,
    pub extra_forums_mean: f64,
    pub members_per_forum_mean: f64,
    pub posts_per_forum_mean: f64,
    pub comments_per_post_mean: f64,
    pub likes_per_message_mean: f64,
    pub moderator_deletion: ModeratorDeletion,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_persons: 1000,
            simulation_start: SIMULATION_START,
            simulation_end: SIMULATION_END,
            cutoff_fraction: 0.97,
            t_safe_millis: 10 * MILLIS_PER_SECOND,
            degree_exponent: 2.5,
            min_degree: 2,
            max_degree: None,
            isolated_fraction: 0.05,
            homophily_weight: 0.6,
            flashmob_count: 3,
            person_deletion_rate: 0.12,
            knows_deletion_rate: 0.012,
            forum_deletion_rate: 0.016,
            membership_deletion_rate: 0.012,
            post_deletion_rate: 0.008,
            comment_deletion_rate: 0.008,
            like_deletion_rate: 0.004,
            extra_forums_mean: 0.5,
            members_per_forum_mean: 6.0,
            posts_per_forum_mean: 6.0,
            comments_per_post_mean: 2.0,
            likes_per_message_mean: 1.5,
            moderator_deletion: ModeratorDeletion::DeleteForum,
        }
    }
}

impl GenConfig {
    pub fn with_persons(seed: u64, num_persons: usize) -> Self {
        Self {
            seed,
            num_persons,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let invalid = |msg: String| Err(DatagenError::ConfigInvalid(msg));
        if self.simulation_start >= self.simulation_end {
            return invalid("simulationStart must precede simulationEnd".into());
        }
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 1.0) {
            return invalid(format!(
                "cutoffFraction {} not in (0, 1]",
                self.cutoff_fraction
            ));
        }
        if self.t_safe_millis < 0 {
            return invalid("tSafe must be non-negative".into());
        }
        if !(self.degree_exponent > 1.0) {
            return invalid(format!(
                "degreeExponent {} must exceed 1",
                self.degree_exponent
            ));
        }
        if self.min_degree == 0 {
            return invalid("minDegree must be at least 1".into());
        }
        if let Some(max) = self.max_degree {
            if max < self.min_degree {
                return invalid("maxDegree below minDegree".into());
            }
        }
        let unit = [
            ("homophilyWeight", self.homophily_weight),
            ("isolatedFraction", self.isolated_fraction),
            ("personDeletionRate", self.person_deletion_rate),
            ("knowsDeletionRate", self.knows_deletion_rate),
            ("forumDeletionRate", self.forum_deletion_rate),
            ("membershipDeletionRate", self.membership_deletion_rate),
            ("postDeletionRate", self.post_deletion_rate),
            ("commentDeletionRate", self.comment_deletion_rate),
            ("likeDeletionRate", self.like_deletion_rate),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("{name} {v} not in [0, 1]"));
            }
        }
        let means = [
            ("extraForumsMean", self.extra_forums_mean),
            ("membersPerForumMean", self.members_per_forum_mean),
            ("postsPerForumMean", self.posts_per_forum_mean),
            ("commentsPerPostMean", self.comments_per_post_mean),
            ("likesPerMessageMean", self.likes_per_message_mean),
        ];
        for (name, v) in means {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be a non-negative number"));
            }
        }
        Ok(())
    }

    /// Cutoff instant: `start + fraction * (end - start)`, truncated to the
    /// start of its day.
    pub fn cutoff(&self) -> SimInstant {
        let span = (self.simulation_end - self.simulation_start) as f64;
        let raw = self
            .simulation_start
            .plus_millis((span * self.cutoff_fraction).floor() as i64);
        raw.truncate_to_day()
    }

    pub fn effective_max_degree(&self) -> u32 {
        let n = self.num_persons.max(1) as f64;
        self.max_degree
            .unwrap_or_else(|| {
                ((4.0 * n.sqrt()) as u32).min(self.num_persons.saturating_sub(1) as u32)
            })
            .max(self.min_degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cutoff_is_november_29() {
        let cutoff = GenConfig::default().cutoff();
        assert_eq!(cutoff, SimInstant::from_ymd_hms(2012, 11, 29, 0, 0, 0));
        assert_eq!(cutoff.to_string(), "2012-11-29T00:00:00.000Z");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = GenConfig::default();
        c.cutoff_fraction = 0.0;
        assert!(matches!(c.validate(), Err(DatagenError::ConfigInvalid(_))));
        let mut c = GenConfig::default();
        c.simulation_end = c.simulation_start;
        assert!(c.validate().is_err());
        let mut c = GenConfig::default();
        c.degree_exponent = 1.0;
        assert!(c.validate().is_err());
        let mut c = GenConfig::default();
        c.homophily_weight = 1.5;
        assert!(c.validate().is_err());
        assert!(GenConfig::default().validate().is_ok());
    }
}
