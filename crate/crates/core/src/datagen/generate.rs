use std::collections::{BTreeSet, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::config::GenConfig;
use super::DatagenError;
use crate::model::dict::{self, COUNTRIES, UNIVERSITIES_PER_COUNTRY};
use crate::model::{
    CountryId, Forum, ForumId, HasMemberEdge, KnowsEdge, Lifecycle, LikesEdge, Message, MessageId,
    MessageKind, ModeratorDeletion, Person, PersonId, SimInstant, TagId, TemporalGraph,
    UniversityId, MILLIS_PER_DAY, MILLIS_PER_HOUR,
};

const MEAN_PERSON_LIFETIME_DAYS: f64 = 400.0;
const FLASHMOB_DURATION: i64 = 2 * MILLIS_PER_HOUR;
const MATCH_ATTEMPTS: usize = 40;

/// Generates the full temporal graph for `config`.
pub fn generate_temporal_graph(config: &GenConfig) -> Result<TemporalGraph, DatagenError> {
    config.validate()?;
    if config.num_persons == 0 {
        return Ok(TemporalGraph::default());
    }
    let mut gen = Generator::new(config);
    gen.persons();
    gen.knows();
    gen.forums();
    gen.memberships();
    gen.posts();
    gen.flashmobs();
    gen.comments();
    gen.likes();
    let mut graph = TemporalGraph {
        persons: gen.persons,
        knows: gen.knows,
        forums: gen.forums,
        memberships: gen.memberships,
        messages: gen.messages,
        likes: gen.likes,
    };
    graph.sort_canonical();
    Ok(graph)
}

/// Separate stream per phase so tuning one phase leaves the others intact.
fn phase_rng(seed: u64, phase: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ phase.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn geometric(rng: &mut impl Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let p_continue = mean / (1.0 + mean);
    let mut n = 0;
    while n < 500 && rng.gen_bool(p_continue) {
        n += 1;
    }
    n
}

struct Generator<'a> {
    cfg: &'a GenConfig,
    next_id: u64,
    t_safe: i64,
    /// Exclusive upper bound for any event.
    horizon: SimInstant,
    persons: Vec<Person>,
    knows: Vec<KnowsEdge>,
    friends: Vec<Vec<usize>>,
    forums: Vec<Forum>,
    /// Person index of each forum's moderator; wall forum listed first.
    moderated: Vec<Vec<usize>>,
    forum_members: Vec<Vec<usize>>,
    memberships: Vec<HasMemberEdge>,
    messages: Vec<Message>,
    likes: Vec<LikesEdge>,
}

impl<'a> Generator<'a> {
    fn new(cfg: &'a GenConfig) -> Self {
        Self {
            cfg,
            next_id: 1,
            t_safe: cfg.t_safe_millis,
            horizon: cfg.simulation_end.plus_millis(1),
            persons: Vec::new(),
            knows: Vec::new(),
            friends: Vec::new(),
            forums: Vec::new(),
            moderated: Vec::new(),
            forum_members: Vec::new(),
            memberships: Vec::new(),
            messages: Vec::new(),
            likes: Vec::new(),
        }
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Creation window for a child of parents with the given latest creation
    /// and earliest deletion: `[created + tSafe, deleted - tSafe)`.
    fn span(&self, created: SimInstant, deleted: Option<SimInstant>) -> Option<(i64, i64)> {
        let lo = created.millis() + self.t_safe;
        let hi = deleted.unwrap_or(self.horizon).min(self.horizon).millis() - self.t_safe;
        (hi > lo).then_some((lo, hi))
    }

    /// Samples a lifecycle for a child created at `creation` whose parents die
    /// at `parent_deletion`. Independent deletions land at least tSafe before
    /// the parents' deletion, so a cascade never races an earlier delete.
    fn lifecycle(
        &self,
        rng: &mut impl Rng,
        creation: SimInstant,
        parent_deletion: Option<SimInstant>,
        rate: f64,
    ) -> Lifecycle {
        if rate > 0.0 && rng.gen_bool(rate) {
            if let Some((lo, hi)) = self.span(creation, parent_deletion) {
                return Lifecycle::new(creation, Some(SimInstant(rng.gen_range(lo..hi))));
            }
        }
        Lifecycle::new(creation, parent_deletion)
    }

    fn persons(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 1);
        let weights = WeightedIndex::new(COUNTRIES.iter().map(|c| c.weight)).expect("weights");
        let start = self.cfg.simulation_start.millis();
        let last = (self.cfg.simulation_end.millis() - MILLIS_PER_DAY).max(start + 1);
        let mean_life = MEAN_PERSON_LIFETIME_DAYS * MILLIS_PER_DAY as f64;
        for _ in 0..self.cfg.num_persons {
            let country = weights.sample(&mut rng);
            let info = &COUNTRIES[country];
            let name_country = if rng.gen_bool(0.9) {
                info
            } else {
                &COUNTRIES[weights.sample(&mut rng)]
            };
            let first_name = name_country
                .first_names
                .choose(&mut rng)
                .unwrap()
                .to_string();
            let last_name = name_country
                .last_names
                .choose(&mut rng)
                .unwrap()
                .to_string();
            let university_id = rng.gen_bool(0.75).then(|| {
                let c = if rng.gen_bool(0.9) {
                    country
                } else {
                    weights.sample(&mut rng)
                };
                UniversityId(
                    c as u64 * UNIVERSITIES_PER_COUNTRY
                        + rng.gen_range(0..UNIVERSITIES_PER_COUNTRY),
                )
            });
            let mut tag_interests = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=4) {
                let tag = if rng.gen_bool(0.7) {
                    TagId(*info.favourite_tags.choose(&mut rng).unwrap())
                } else {
                    TagId(rng.gen_range(0..dict::tag_count() as u64))
                };
                tag_interests.insert(tag);
            }
            let creation = SimInstant(rng.gen_range(start..last));
            let deletion = if rng.gen_bool(self.cfg.person_deletion_rate) {
                let min_life = MILLIS_PER_HOUR;
                let max_life =
                    (self.horizon.millis() - self.t_safe) - (creation.millis() + min_life);
                (max_life > 0).then(|| {
                    // exponential lifetime truncated to the remaining window
                    let tail = 1.0 - (-(max_life as f64) / mean_life).exp();
                    let u: f64 = rng.gen();
                    let life = -mean_life * (1.0 - u * tail).ln();
                    let life = (life as i64).clamp(0, max_life - 1);
                    creation.plus_millis(min_life + life)
                })
            } else {
                None
            };
            let id = PersonId(self.fresh_id());
            self.persons.push(Person {
                id,
                first_name,
                last_name,
                country_id: CountryId(country as u64),
                university_id,
                tag_interests,
                lifecycle: Lifecycle::new(creation, deletion),
            });
        }
        self.friends = vec![Vec::new(); self.persons.len()];
    }

    fn pair_span(&self, u: usize, v: usize) -> Option<(i64, i64)> {
        let (a, b) = (&self.persons[u].lifecycle, &self.persons[v].lifecycle);
        let deleted = match (a.deletion, b.deletion) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        self.span(a.creation.max(b.creation), deleted)
    }

    /// Power-law target degrees realized by stub matching; with probability
    /// `homophily_weight` the partner is drawn from a shared university,
    /// country or interest pool instead of the global pool.
    fn knows(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 2);
        let n = self.persons.len();
        if n < 2 {
            return;
        }
        let (dmin, dmax) = (self.cfg.min_degree, self.cfg.effective_max_degree());
        let degrees: Vec<u32> = (dmin..=dmax).collect();
        let dist = WeightedIndex::new(
            degrees
                .iter()
                .map(|&d| (d as f64).powf(-self.cfg.degree_exponent)),
        )
        .expect("degree weights");
        let mut remaining: Vec<u32> = (0..n)
            .map(|_| {
                if rng.gen_bool(self.cfg.isolated_fraction) {
                    0
                } else {
                    degrees[dist.sample(&mut rng)]
                }
            })
            .collect();

        let n_univ = dict::country_count() * UNIVERSITIES_PER_COUNTRY as usize;
        let mut global = Vec::new();
        let mut by_country = vec![Vec::new(); dict::country_count()];
        let mut by_univ = vec![Vec::new(); n_univ];
        let mut by_tag = vec![Vec::new(); dict::tag_count()];
        for (i, p) in self.persons.iter().enumerate() {
            for _ in 0..remaining[i] {
                global.push(i);
                by_country[p.country_id.0 as usize].push(i);
                if let Some(u) = p.university_id {
                    by_univ[u.0 as usize].push(i);
                }
                for t in &p.tag_interests {
                    by_tag[t.0 as usize].push(i);
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        for &u in &order {
            while remaining[u] > 0 {
                let mut partner = None;
                for _ in 0..MATCH_ATTEMPTS {
                    let p = &self.persons[u];
                    let pool: &Vec<usize> = if rng.gen_bool(self.cfg.homophily_weight) {
                        let roll: f64 = rng.gen();
                        match p.university_id {
                            Some(univ) if roll < 0.4 => &by_univ[univ.0 as usize],
                            _ if roll < 0.8 => &by_country[p.country_id.0 as usize],
                            _ => {
                                let tag = p.tag_interests.iter().choose(&mut rng).unwrap();
                                &by_tag[tag.0 as usize]
                            }
                        }
                    } else {
                        &global
                    };
                    let Some(&v) = pool.choose(&mut rng) else {
                        continue;
                    };
                    let key = (u.min(v), u.max(v));
                    if v != u
                        && remaining[v] > 0
                        && !seen.contains(&key)
                        && self.pair_span(u, v).is_some()
                    {
                        partner = Some(v);
                        break;
                    }
                }
                let Some(v) = partner else {
                    remaining[u] = 0;
                    break;
                };
                remaining[u] -= 1;
                remaining[v] -= 1;
                seen.insert((u.min(v), u.max(v)));
                let (lo, hi) = self.pair_span(u, v).unwrap();
                let x: f64 = rng.gen();
                let creation = SimInstant(lo + ((hi - lo) as f64 * x * x) as i64);
                let parent_del = self.persons[u]
                    .lifecycle
                    .deletion
                    .into_iter()
                    .chain(self.persons[v].lifecycle.deletion)
                    .min();
                let lifecycle =
                    self.lifecycle(&mut rng, creation, parent_del, self.cfg.knows_deletion_rate);
                self.knows.push(
                    KnowsEdge::new(self.persons[u].id, self.persons[v].id, lifecycle).unwrap(),
                );
                self.friends[u].push(v);
                self.friends[v].push(u);
            }
        }
    }

    fn forums(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 3);
        self.moderated = vec![Vec::new(); self.persons.len()];
        for i in 0..self.persons.len() {
            let lc = self.persons[i].lifecycle;
            let Some((lo, hi)) = self.span(lc.creation, lc.deletion) else {
                continue;
            };
            let count = 1 + geometric(&mut rng, self.cfg.extra_forums_mean);
            for k in 0..count {
                let creation = if k == 0 {
                    SimInstant(rng.gen_range(lo..hi.min(lo + 7 * MILLIS_PER_DAY).max(lo + 1)))
                } else {
                    SimInstant(rng.gen_range(lo..hi))
                };
                let parent_del = match self.cfg.moderator_deletion {
                    ModeratorDeletion::DeleteForum => lc.deletion,
                    ModeratorDeletion::KeepForum => None,
                };
                let lifecycle =
                    self.lifecycle(&mut rng, creation, parent_del, self.cfg.forum_deletion_rate);
                let id = ForumId(self.fresh_id());
                self.moderated[i].push(self.forums.len());
                self.forums.push(Forum {
                    id,
                    moderator_person_id: self.persons[i].id,
                    lifecycle,
                });
            }
        }
        self.forum_members = vec![Vec::new(); self.forums.len()];
    }

    fn person_index(&self, id: PersonId) -> usize {
        (id.0 - 1) as usize
    }

    fn memberships(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 4);
        let n = self.persons.len();
        for f in 0..self.forums.len() {
            let forum = self.forums[f];
            let moderator = self.person_index(forum.moderator_person_id);
            let mut chosen = HashSet::new();
            for _ in 0..geometric(&mut rng, self.cfg.members_per_forum_mean) {
                let candidate = if rng.gen_bool(0.6) && !self.friends[moderator].is_empty() {
                    *self.friends[moderator].choose(&mut rng).unwrap()
                } else {
                    rng.gen_range(0..n)
                };
                if candidate == moderator || !chosen.insert(candidate) {
                    continue;
                }
                let plc = self.persons[candidate].lifecycle;
                let deleted = min_opt(forum.lifecycle.deletion, plc.deletion);
                let Some((lo, hi)) = self.span(forum.lifecycle.creation.max(plc.creation), deleted)
                else {
                    continue;
                };
                let x: f64 = rng.gen();
                let creation = SimInstant(lo + ((hi - lo) as f64 * x * x) as i64);
                let lifecycle = self.lifecycle(
                    &mut rng,
                    creation,
                    deleted,
                    self.cfg.membership_deletion_rate,
                );
                self.memberships.push(HasMemberEdge {
                    forum_id: forum.id,
                    person_id: self.persons[candidate].id,
                    lifecycle,
                });
                self.forum_members[f].push(candidate);
            }
        }
    }

    fn message_country(&self, rng: &mut impl Rng, creator: usize) -> CountryId {
        if rng.gen_bool(0.85) {
            self.persons[creator].country_id
        } else {
            CountryId(rng.gen_range(0..dict::country_count() as u64))
        }
    }

    fn push_post(
        &mut self,
        rng: &mut impl Rng,
        forum: usize,
        creator: usize,
        creation: SimInstant,
        tags: BTreeSet<TagId>,
    ) {
        let f = self.forums[forum];
        let parent_del = min_opt(
            f.lifecycle.deletion,
            self.persons[creator].lifecycle.deletion,
        );
        let lifecycle = self.lifecycle(rng, creation, parent_del, self.cfg.post_deletion_rate);
        let id = MessageId(self.fresh_id());
        let country_id = self.message_country(rng, creator);
        self.messages.push(Message {
            id,
            kind: MessageKind::Post,
            creator_person_id: self.persons[creator].id,
            container_forum_id: Some(f.id),
            reply_to_message_id: None,
            country_id,
            creation_tag_ids: tags,
            lifecycle,
            root_post_id: id,
        });
    }

    fn posts(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 5);
        for f in 0..self.forums.len() {
            let forum = self.forums[f];
            let moderator = self.person_index(forum.moderator_person_id);
            for _ in 0..geometric(&mut rng, self.cfg.posts_per_forum_mean) {
                let creator = if rng.gen_bool(0.5) || self.forum_members[f].is_empty() {
                    moderator
                } else {
                    *self.forum_members[f].choose(&mut rng).unwrap()
                };
                let plc = self.persons[creator].lifecycle;
                let deleted = min_opt(forum.lifecycle.deletion, plc.deletion);
                let Some((lo, hi)) = self.span(forum.lifecycle.creation.max(plc.creation), deleted)
                else {
                    continue;
                };
                let creation = SimInstant(rng.gen_range(lo..hi));
                let interests: Vec<TagId> = self.persons[creator]
                    .tag_interests
                    .iter()
                    .copied()
                    .collect();
                let k = rng.gen_range(1..=2);
                let tags = interests.choose_multiple(&mut rng, k).copied().collect();
                self.push_post(&mut rng, f, creator, creation, tags);
            }
        }
    }

    /// Bursts of posts on one tag within a two-hour interval.
    fn flashmobs(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 6);
        let start = self.cfg.simulation_start.millis();
        let end = self.cfg.simulation_end.millis();
        let n = self.persons.len();
        let size = (n / 8).max(40);
        for _ in 0..self.cfg.flashmob_count {
            let tag = TagId(rng.gen_range(0..dict::tag_count() as u64));
            let from = start + (end - start) / 10;
            let to = (end - 2 * MILLIS_PER_DAY).max(from + 1);
            let center = rng.gen_range(from..to);
            let mut created = 0;
            let mut attempts = 0;
            while created < size && attempts < size * 50 {
                attempts += 1;
                let p = rng.gen_range(0..n);
                let Some(&wall) = self.moderated[p].first() else {
                    continue;
                };
                let t = SimInstant(center + rng.gen_range(0..FLASHMOB_DURATION));
                let forum = self.forums[wall];
                let plc = self.persons[p].lifecycle;
                let deleted = min_opt(forum.lifecycle.deletion, plc.deletion);
                match self.span(forum.lifecycle.creation.max(plc.creation), deleted) {
                    Some((lo, hi)) if (lo..hi).contains(&t.millis()) => {
                        self.push_post(&mut rng, wall, p, t, BTreeSet::from([tag]));
                        created += 1;
                    }
                    _ => {}
                }
            }
        }
    }

    fn comments(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 7);
        let n = self.persons.len();
        let post_count = self.messages.len();
        let forum_index: std::collections::HashMap<ForumId, usize> = self
            .forums
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id, i))
            .collect();
        for post in 0..post_count {
            let mut thread = vec![post];
            let forum = forum_index[&self.messages[post].container_forum_id.unwrap()];
            for _ in 0..geometric(&mut rng, self.cfg.comments_per_post_mean) {
                let parent = *thread.choose(&mut rng).unwrap();
                let parent_creator = self.person_index(self.messages[parent].creator_person_id);
                let roll: f64 = rng.gen();
                let creator = if roll < 0.5 && !self.friends[parent_creator].is_empty() {
                    *self.friends[parent_creator].choose(&mut rng).unwrap()
                } else if roll < 0.8 && !self.forum_members[forum].is_empty() {
                    *self.forum_members[forum].choose(&mut rng).unwrap()
                } else {
                    rng.gen_range(0..n)
                };
                let (mlc, plc) = (
                    self.messages[parent].lifecycle,
                    self.persons[creator].lifecycle,
                );
                let deleted = min_opt(mlc.deletion, plc.deletion);
                let Some((lo, hi)) = self.span(mlc.creation.max(plc.creation), deleted) else {
                    continue;
                };
                let x: f64 = rng.gen();
                let creation = SimInstant(lo + ((hi - lo) as f64 * x * x * x) as i64);
                let lifecycle =
                    self.lifecycle(&mut rng, creation, deleted, self.cfg.comment_deletion_rate);
                let id = MessageId(self.fresh_id());
                let country_id = self.message_country(&mut rng, creator);
                let parent_msg = &self.messages[parent];
                let comment = Message {
                    id,
                    kind: MessageKind::Comment,
                    creator_person_id: self.persons[creator].id,
                    container_forum_id: None,
                    reply_to_message_id: Some(parent_msg.id),
                    country_id,
                    creation_tag_ids: self.messages[post].creation_tag_ids.clone(),
                    lifecycle,
                    root_post_id: parent_msg.root_post_id,
                };
                thread.push(self.messages.len());
                self.messages.push(comment);
            }
        }
    }

    fn likes(&mut self) {
        let mut rng = phase_rng(self.cfg.seed, 8);
        let n = self.persons.len();
        for m in 0..self.messages.len() {
            let creator = self.person_index(self.messages[m].creator_person_id);
            let mlc = self.messages[m].lifecycle;
            let mut likers = HashSet::new();
            for _ in 0..geometric(&mut rng, self.cfg.likes_per_message_mean) {
                let p = if rng.gen_bool(0.6) && !self.friends[creator].is_empty() {
                    *self.friends[creator].choose(&mut rng).unwrap()
                } else {
                    rng.gen_range(0..n)
                };
                if !likers.insert(p) {
                    continue;
                }
                let plc = self.persons[p].lifecycle;
                let deleted = min_opt(mlc.deletion, plc.deletion);
                let Some((lo, hi)) = self.span(mlc.creation.max(plc.creation), deleted) else {
                    continue;
                };
                let x: f64 = rng.gen();
                let creation = SimInstant(lo + ((hi - lo) as f64 * x * x) as i64);
                let lifecycle =
                    self.lifecycle(&mut rng, creation, deleted, self.cfg.like_deletion_rate);
                self.likes.push(LikesEdge {
                    person_id: self.persons[p].id,
                    message_id: self.messages[m].id,
                    lifecycle,
                });
            }
        }
    }
}

fn min_opt(a: Option<SimInstant>, b: Option<SimInstant>) -> Option<SimInstant> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn empty_config_yields_empty_graph() {
        let g = generate_temporal_graph(&GenConfig::with_persons(1, 0)).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = GenConfig::with_persons(1, 10);
        cfg.cutoff_fraction = 2.0;
        assert!(matches!(
            generate_temporal_graph(&cfg),
            Err(DatagenError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn generated_graph_satisfies_temporal_invariants() {
        for policy in [ModeratorDeletion::DeleteForum, ModeratorDeletion::KeepForum] {
            let mut cfg = GenConfig::with_persons(7, 300);
            cfg.moderator_deletion = policy;
            cfg.person_deletion_rate = 0.2;
            let g = generate_temporal_graph(&cfg).unwrap();
            let errors = g.check_invariants(policy);
            assert!(
                errors.is_empty(),
                "{policy:?}: {:?}",
                &errors[..errors.len().min(10)]
            );
            for m in &g.messages {
                assert!(m.lifecycle.creation >= cfg.simulation_start);
                assert!(m.lifecycle.deletion_or_max() > m.lifecycle.creation);
            }
        }
    }

    #[test]
    fn deleted_persons_take_their_content_along() {
        let mut cfg = GenConfig::with_persons(11, 300);
        cfg.person_deletion_rate = 0.3;
        let g = generate_temporal_graph(&cfg).unwrap();
        let deleted: HashMap<PersonId, SimInstant> = g
            .persons
            .iter()
            .filter_map(|p| p.lifecycle.deletion.map(|d| (p.id, d)))
            .collect();
        assert!(!deleted.is_empty());
        for m in &g.messages {
            if let Some(&d) = deleted.get(&m.creator_person_id) {
                assert!(
                    m.lifecycle.deletion.is_some_and(|md| md <= d),
                    "message {}",
                    m.id
                );
            }
        }
    }

    #[test]
    fn dependent_creations_respect_t_safe() {
        let cfg = GenConfig::with_persons(3, 200);
        let g = generate_temporal_graph(&cfg).unwrap();
        let persons: HashMap<_, _> = g.persons.iter().map(|p| (p.id, p.lifecycle)).collect();
        let messages: HashMap<_, _> = g.messages.iter().map(|m| (m.id, m.lifecycle)).collect();
        for l in &g.likes {
            let dep = persons[&l.person_id]
                .creation
                .max(messages[&l.message_id].creation);
            assert!(l.lifecycle.creation - dep >= cfg.t_safe_millis);
        }
        for k in &g.knows {
            let dep = persons[&k.person1_id]
                .creation
                .max(persons[&k.person2_id].creation);
            assert!(k.lifecycle.creation - dep >= cfg.t_safe_millis);
        }
    }
}
