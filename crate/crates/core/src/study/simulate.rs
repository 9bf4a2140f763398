//! Simulated participants for desk-scale runs.
//!
//! The simulator drives a [`Platform`] exactly as the console would, so every
//! event in the resulting log went through the same validation as a real
//! session. Each participant follows a behavior policy drawn from the
//! population spec, and what they actually did is written to a ground-truth
//! table that analytics output can be checked against.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Answer, Answers, EventLog, PhasePayload, Post, StudyArm, StudyConfig, POSTS_PER_SUBSET};
use crate::analytics::preferences::{Dimension, Preference};
use crate::analytics::usage::UsageClass;
use crate::clock::{Clock, ManualClock, Timestamp};
use crate::empathy::{EmpathyError, EmpathyScore, RuleScorer, Scorer, ScoringContext};
use crate::platform::{ApiError, FlagRequest, IngestReport, Platform, PlatformConfig, PlatformParts};
use crate::rewriter::{BundleKind, RewriterConfig, TemplateBank};
use crate::safety::{FlagTarget, SafetyRuleSet};

/// Behavior of one planted participant type in an assisted arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorGroup {
    pub name: String,
    /// Relative share of assisted participants that follow this group.
    pub weight: f64,
    /// Per-post chance of asking for feedback. Ignored when `consult_count`
    /// is set.
    pub consult_prob: f64,
    /// Inclusive range for the exact number of posts to consult on.
    pub consult_count: Option<[usize; 2]>,
    /// Chance of clicking suggestions on a consulted post.
    pub accept_prob: f64,
    /// Chance of retyping a suggestion when not clicking.
    pub indirect_prob: f64,
    /// Chance of asking for another candidate on a consulted post.
    pub reload_prob: f64,
    /// Per-mechanism chance that a draft expresses it, in [0, 1].
    pub base_quality: f64,
    /// Fraction of `base_quality` lost by the last post.
    pub fatigue: f64,
}

impl Default for BehaviorGroup {
    fn default() -> Self {
        Self {
            name: "default".into(),
            weight: 1.0,
            consult_prob: 0.6,
            consult_count: None,
            accept_prob: 0.5,
            indirect_prob: 0.3,
            reload_prob: 0.1,
            base_quality: 0.35,
            fatigue: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlBehavior {
    pub base_quality: f64,
    pub fatigue: f64,
}

impl Default for ControlBehavior {
    fn default() -> Self {
        Self {
            base_quality: 0.35,
            fatigue: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorSpec {
    pub raters: usize,
    pub tasks_per_rater: usize,
    pub dimensions: Vec<Dimension>,
    /// Standard deviation of the noise added to each side's score.
    pub noise_sd: f64,
    /// Score gaps at or under this margin are judged a tie.
    pub tie_margin: f64,
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        Self {
            raters: 3,
            tasks_per_rater: 40,
            dimensions: vec![Dimension::Empathy],
            noise_sd: 0.75,
            tie_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub participants: usize,
    pub seed: u64,
    pub arm_weights: [f64; 3],
    /// Number of synthetic seeker posts before safety gating.
    pub posts: usize,
    /// Synthetic posts that should be escalated at ingest.
    pub unsafe_posts: usize,
    pub groups: Vec<BehaviorGroup>,
    pub control: ControlBehavior,
    /// Share of participants who report finding supportive writing hard.
    pub challenged_prob: f64,
    /// Multiplier on base quality for those participants.
    pub challenged_quality: f64,
    pub post_flag_prob: f64,
    pub feedback_flag_prob: f64,
    /// Chance a participant walks away partway through responding.
    pub dropout_prob: f64,
    /// Chance the primary scorer fails on a classification request.
    pub scorer_failure_prob: f64,
    pub evaluators: EvaluatorSpec,
    pub rewriter: RewriterConfig,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            participants: 30,
            seed: 7,
            arm_weights: StudyConfig::default().arm_weights,
            posts: 200,
            unsafe_posts: 4,
            groups: vec![BehaviorGroup::default()],
            control: ControlBehavior::default(),
            challenged_prob: 0.4,
            challenged_quality: 0.5,
            post_flag_prob: 0.01,
            feedback_flag_prob: 0.03,
            dropout_prob: 0.05,
            scorer_failure_prob: 0.1,
            evaluators: EvaluatorSpec::default(),
            rewriter: RewriterConfig::default(),
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1], got {p}"))
            }
        };
        if self.participants == 0 {
            return Err("participants must be positive".into());
        }
        if self.groups.is_empty() || self.groups.iter().all(|g| g.weight <= 0.0) {
            return Err("at least one behavior group with positive weight is required".into());
        }
        for g in &self.groups {
            for (n, p) in [
                ("consult_prob", g.consult_prob),
                ("accept_prob", g.accept_prob),
                ("indirect_prob", g.indirect_prob),
                ("reload_prob", g.reload_prob),
                ("base_quality", g.base_quality),
                ("fatigue", g.fatigue),
            ] {
                prob(&format!("{}.{n}", g.name), p)?;
            }
            if let Some([lo, hi]) = g.consult_count {
                if lo > hi || hi > POSTS_PER_SUBSET {
                    return Err(format!("{}.consult_count must satisfy lo <= hi <= 10", g.name));
                }
            }
        }
        for (n, p) in [
            ("control.base_quality", self.control.base_quality),
            ("control.fatigue", self.control.fatigue),
            ("challenged_prob", self.challenged_prob),
            ("challenged_quality", self.challenged_quality),
            ("post_flag_prob", self.post_flag_prob),
            ("feedback_flag_prob", self.feedback_flag_prob),
            ("dropout_prob", self.dropout_prob),
            ("scorer_failure_prob", self.scorer_failure_prob),
        ] {
            prob(n, p)?;
        }
        if self.unsafe_posts > self.posts {
            return Err("unsafe_posts cannot exceed posts".into());
        }
        Ok(())
    }
}

/// What one simulated participant actually did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub participant_id: String,
    pub arm: StudyArm,
    pub group: Option<String>,
    pub challenged: bool,
    pub completed: bool,
    pub consult_count: usize,
    pub usage_counts: BTreeMap<UsageClass, usize>,
    pub used_reload: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participants: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn get(&self, participant_id: &str) -> Option<&TruthRecord> {
        self.participants.iter().find(|t| t.participant_id == participant_id)
    }
}

#[derive(Debug)]
pub struct Simulation {
    pub log: EventLog,
    pub truth: GroundTruth,
    pub ingest: IngestReport,
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid population spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Api(#[from] ApiError),
}

const SEEKER_TEMPLATES: [&str; 6] = [
    "I've been so stressed about my {t} lately and I can't sleep.",
    "Things with my {t} keep getting worse and I don't know what to do.",
    "I feel like I'm failing at everything, especially my {t}.",
    "My {t} has been really overwhelming and I feel alone.",
    "I can't stop worrying about my {t}, it's all I think about.",
    "Nobody seems to understand how much my {t} is getting to me.",
];

const UNSAFE_TEMPLATES: [&str; 2] = [
    "Because of my {t} I keep thinking I should commit suicide.",
    "My {t} is so bad that I started to cut again.",
];

const PLAIN: [&str; 8] = [
    "Hang in there.",
    "Things will get better soon.",
    "Try to take it one day at a time.",
    "You can get through this.",
    "Maybe go for a walk to clear your head.",
    "Don't worry!",
    "I'm there for you.",
    "Keep your head up.",
];

const REACTION: [&str; 3] = ["That is tough.", "Ugh, that is awful.", "Sending you hugs."];
const INTERPRETATION: [&str; 2] = ["I understand.", "I get that."];
const EXPLORATION: [&str; 3] = ["What happened?", "Do you want to talk more?", "How are you holding up?"];

/// Seeker posts over the bundled topic nouns, with `unsafe_count` escalation
/// candidates spread through the list.
pub fn synthetic_posts(count: usize, unsafe_count: usize, seed: u64) -> Vec<Post> {
    let bank = TemplateBank::bundled();
    let topics = &bank.topic_nouns;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_9057);
    let mut unsafe_slots: Vec<usize> = (0..count).collect();
    unsafe_slots.shuffle(&mut rng);
    unsafe_slots.truncate(unsafe_count);
    (0..count)
        .map(|i| {
            let topic = &topics[i % topics.len()];
            let template = if unsafe_slots.contains(&i) {
                UNSAFE_TEMPLATES[i % UNSAFE_TEMPLATES.len()]
            } else {
                SEEKER_TEMPLATES[(i / topics.len() + i) % SEEKER_TEMPLATES.len()]
            };
            Post {
                id: format!("post-{i:04}"),
                text: template.replace("{t}", topic),
            }
        })
        .collect()
}

/// Rule scorer that fails on a deterministic share of inputs, standing in for
/// an unreliable remote model.
struct FlakyScorer {
    inner: RuleScorer,
    failure_prob: f64,
}

impl Scorer for FlakyScorer {
    fn score(&self, ctx: &ScoringContext) -> Result<EmpathyScore, EmpathyError> {
        let digest = Sha256::digest(ctx.response.as_bytes());
        let u = u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]]) as f64 / u32::MAX as f64;
        if u < self.failure_prob {
            Err(EmpathyError::BackendUnavailable("simulated scorer outage".into()))
        } else {
            Ok(self.inner.score_texts(&ctx.seeker_post, &ctx.response))
        }
    }
}

/// Smooth weighted round robin: deterministic and exact in the limit, so a
/// population of n follows the group weights as closely as integers allow.
struct RoundRobin {
    weights: Vec<f64>,
    current: Vec<f64>,
}

impl RoundRobin {
    fn new(weights: Vec<f64>) -> Self {
        let current = vec![0.0; weights.len()];
        Self { weights, current }
    }

    fn next(&mut self) -> usize {
        let total: f64 = self.weights.iter().sum();
        for (c, w) in self.current.iter_mut().zip(&self.weights) {
            *c += w;
        }
        let mut best = 0;
        for i in 1..self.current.len() {
            if self.current[i] > self.current[best] {
                best = i;
            }
        }
        self.current[best] -= total;
        best
    }
}

struct Driver<'a> {
    spec: &'a PopulationSpec,
    platform: Platform,
    clock: Arc<ManualClock>,
    rng: ChaCha8Rng,
    scorer: RuleScorer,
}

impl Driver<'_> {
    fn tick(&mut self, lo_s: i64, hi_s: i64) {
        let ms = self.rng.random_range(lo_s * 1000..=hi_s * 1000);
        self.clock.advance(ms);
    }

    fn pick<'s>(&mut self, options: &[&'s str]) -> &'s str {
        options.choose(&mut self.rng).expect("non-empty")
    }

    fn demographics(&mut self) -> Answers {
        let mut a = Answers::new();
        let age = self.pick(&["18-24", "25-34", "35-44", "45-54", "55+"]);
        let gender = self.pick(&["woman", "man", "non_binary", "prefer_not_to_say"]);
        let english = self.pick(&["yes", "yes", "yes", "no"]);
        a.insert("age_range".into(), Answer::Text(age.into()));
        a.insert("gender".into(), Answer::Text(gender.into()));
        a.insert("first_language_english".into(), Answer::Text(english.into()));
        a
    }

    fn pre_survey(&mut self, challenged: bool) -> Answers {
        let mut a = Answers::new();
        let exp = self.pick(&["none", "some", "some", "extensive"]);
        a.insert("peer_support_experience".into(), Answer::Text(exp.into()));
        let w = if challenged { "challenging" } else { "not_challenging" };
        a.insert("writing_challenging".into(), Answer::Text(w.into()));
        a.insert("confidence_writing".into(), Answer::Level(self.rng.random_range(1..=5)));
        a.insert("feedback_openness".into(), Answer::Level(self.rng.random_range(1..=5)));
        a
    }

    fn post_survey(&mut self, assisted: bool) -> Answers {
        let mut a = Answers::new();
        a.insert("confidence_writing".into(), Answer::Level(self.rng.random_range(1..=5)));
        if assisted {
            a.insert("feedback_helpful".into(), Answer::Level(self.rng.random_range(1..=5)));
        }
        a
    }

    /// A short draft: one or two plain sentences plus, per mechanism, a weak
    /// expression of it with probability `quality`.
    fn draft(&mut self, quality: f64) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if self.rng.random_bool(quality) {
            parts.push(self.pick(&REACTION));
        }
        let n_plain = self.rng.random_range(1..=2);
        let mut plain = PLAIN.to_vec();
        plain.shuffle(&mut self.rng);
        parts.extend(plain.into_iter().take(n_plain));
        if self.rng.random_bool(quality) {
            parts.push(self.pick(&INTERPRETATION));
        }
        if self.rng.random_bool(quality) {
            parts.push(self.pick(&EXPLORATION));
        }
        parts.join(" ")
    }

    fn consult_plan(&mut self, group: &BehaviorGroup) -> [bool; POSTS_PER_SUBSET] {
        let mut plan = [false; POSTS_PER_SUBSET];
        match group.consult_count {
            Some([lo, hi]) => {
                let n = self.rng.random_range(lo..=hi);
                let mut idx: Vec<usize> = (0..POSTS_PER_SUBSET).collect();
                idx.shuffle(&mut self.rng);
                for &i in &idx[..n] {
                    plan[i] = true;
                }
            }
            None => {
                for slot in plan.iter_mut() {
                    *slot = self.rng.random_bool(group.consult_prob);
                }
            }
        }
        plan
    }

    fn run_participant(&mut self, group: Option<&BehaviorGroup>, challenged: bool) -> Result<TruthRecord, ApiError> {
        let spec = self.spec;
        let demographics = self.demographics();
        let enrollment = self.platform.enroll(demographics)?;
        let pid = enrollment.participant.id.clone();
        let sid = enrollment.session_id.clone();
        let arm = enrollment.participant.arm;
        let group = if arm == StudyArm::HumanOnly { None } else { group };

        let mut truth = TruthRecord {
            participant_id: pid.clone(),
            arm,
            group: group.map(|g| g.name.clone()),
            challenged,
            completed: false,
            consult_count: 0,
            usage_counts: UsageClass::ALL.iter().map(|&c| (c, 0)).collect(),
            used_reload: false,
        };

        self.tick(30, 120);
        let pre = self.pre_survey(challenged);
        self.platform.advance_phase(&pid, PhasePayload::PreSurvey { answers: pre })?;
        self.tick(60, 240);
        self.platform
            .advance_phase(&pid, PhasePayload::Training { acknowledged: true })?;

        let (base_quality, fatigue) = match group {
            Some(g) => (g.base_quality, g.fatigue),
            None => (spec.control.base_quality, spec.control.fatigue),
        };
        let base_quality = if challenged {
            base_quality * spec.challenged_quality
        } else {
            base_quality
        };
        let plan = match group {
            Some(g) => self.consult_plan(g),
            None => [false; POSTS_PER_SUBSET],
        };
        let drop_at = self
            .rng
            .random_bool(spec.dropout_prob)
            .then(|| self.rng.random_range(0..POSTS_PER_SUBSET));

        for (idx, &consult) in plan.iter().enumerate() {
            if drop_at == Some(idx) {
                return Ok(truth);
            }
            let post = self.platform.current_post(&sid)?;
            self.tick(10, 60);
            if self.rng.random_bool(spec.post_flag_prob) {
                self.platform.flag(FlagRequest {
                    target: FlagTarget::SeekerPost,
                    target_id: post.post_id.clone(),
                    participant_id: pid.clone(),
                    reason: Some("uncomfortable content".into()),
                })?;
            }
            let quality = base_quality * (1.0 - fatigue * idx as f64 / (POSTS_PER_SUBSET - 1) as f64);
            let draft = self.draft(quality.clamp(0.0, 1.0));
            self.tick(30, 180);
            let mut response = draft.clone();
            if consult {
                let g = group.expect("consulting requires a behavior group");
                truth.consult_count += 1;
                let class = match arm {
                    StudyArm::HumanPlusRewriting => {
                        let (r, class, reloaded) = self.rewriting_post(&sid, &pid, &draft, g)?;
                        response = r;
                        truth.used_reload |= reloaded;
                        class
                    }
                    StudyArm::HumanPlusClassification => {
                        self.platform.scores(&sid, &draft)?;
                        UsageClass::None
                    }
                    StudyArm::HumanOnly => unreachable!("control has no consult plan"),
                };
                *truth.usage_counts.entry(class).or_default() += 1;
            }
            self.tick(10, 90);
            self.platform.submit_response(&sid, &response)?;
        }

        self.platform.advance_phase(&pid, PhasePayload::Responding)?;
        self.tick(30, 120);
        let post = self.post_survey(arm != StudyArm::HumanOnly);
        self.platform
            .advance_phase(&pid, PhasePayload::PostSurvey { answers: post })?;
        truth.completed = true;
        Ok(truth)
    }

    fn rewriting_post(
        &mut self,
        sid: &str,
        pid: &str,
        draft: &str,
        g: &BehaviorGroup,
    ) -> Result<(String, UsageClass, bool), ApiError> {
        let mut fb = self.platform.feedback(sid, draft)?;
        self.tick(5, 30);
        let mut reloaded = false;
        if self.rng.random_bool(g.reload_prob) {
            fb = self.platform.reload(sid)?;
            reloaded = true;
            self.tick(5, 30);
        }
        if self.rng.random_bool(self.spec.feedback_flag_prob) {
            self.platform.flag(FlagRequest {
                target: FlagTarget::Feedback,
                target_id: fb.feedback_id.clone(),
                participant_id: pid.to_string(),
                reason: Some("unhelpful suggestion".into()),
            })?;
        }
        let actions = fb.bundle.script.actions().to_vec();
        let has_edits = fb.bundle.kind == BundleKind::Suggestions && !actions.is_empty();
        if has_edits && self.rng.random_bool(g.accept_prob) {
            let mut ids: Vec<usize> = (0..actions.len()).filter(|_| self.rng.random_bool(0.7)).collect();
            if ids.is_empty() {
                ids.push(self.rng.random_range(0..actions.len()));
            }
            let view = self.platform.accept_actions(sid, &fb.feedback_id, &ids)?;
            return Ok((view.draft, UsageClass::Direct, reloaded));
        }
        if has_edits && self.rng.random_bool(g.indirect_prob) {
            // Retype one suggested sentence by hand at the end of the draft.
            let fresh: Vec<&str> = actions
                .iter()
                .map(|a| a.text.as_str())
                .filter(|t| !draft.contains(t))
                .collect();
            if let Some(text) = fresh.choose(&mut self.rng) {
                return Ok((format!("{draft} {text}"), UsageClass::Indirect, reloaded));
            }
        }
        Ok((draft.to_string(), UsageClass::None, reloaded))
    }

    fn evaluate(&mut self) -> Result<(), ApiError> {
        let ev = self.spec.evaluators.clone();
        let noise = Normal::new(0.0, ev.noise_sd.max(1e-12)).expect("finite sd");
        for r in 0..ev.raters {
            let rater = format!("R{:03}", r + 1);
            for &dim in &ev.dimensions {
                for _ in 0..ev.tasks_per_rater {
                    let Some(task) = self.platform.eval_next(&rater, dim)? else {
                        break;
                    };
                    let sa = self.scorer.score_texts(&task.seeker_post, &task.response_a).total() as f64;
                    let sb = self.scorer.score_texts(&task.seeker_post, &task.response_b).total() as f64;
                    let gap = match dim {
                        Dimension::Empathy => sa - sb,
                        // Suggested sentences read as less personal than the
                        // participant's own wording.
                        Dimension::Authenticity => {
                            suggested_sentences(&task.response_b) as f64 - suggested_sentences(&task.response_a) as f64
                        }
                    } + noise.sample(&mut self.rng)
                        - noise.sample(&mut self.rng);
                    let pref = if gap > ev.tie_margin {
                        Preference::A
                    } else if gap < -ev.tie_margin {
                        Preference::B
                    } else {
                        Preference::Tie
                    };
                    self.tick(20, 90);
                    self.platform.eval_submit(&task.task_id, pref)?;
                }
            }
        }
        Ok(())
    }
}

/// Sentences that did not come from the simulated participants' own phrase
/// pools.
fn suggested_sentences(text: &str) -> usize {
    crate::textcore::segment_sentences(text)
        .sentences()
        .iter()
        .filter(|s| {
            ![&PLAIN[..], &REACTION, &INTERPRETATION, &EXPLORATION]
                .iter()
                .any(|pool| pool.contains(&s.as_str()))
        })
        .count()
}

/// Runs a whole population through enrollment, responding, surveys and
/// evaluation. Identical specs produce byte-identical logs.
pub fn simulate_population(spec: &PopulationSpec, rules: SafetyRuleSet) -> Result<Simulation, SimulationError> {
    spec.validate().map_err(SimulationError::Spec)?;
    let clock = Arc::new(ManualClock::new(Timestamp::from_millis(1_767_225_600_000)));
    let posts = synthetic_posts(spec.posts, spec.unsafe_posts, spec.seed);
    let config = PlatformConfig {
        study: StudyConfig {
            arm_weights: spec.arm_weights,
            seed: spec.seed,
            ..StudyConfig::default()
        },
        rewriter: RewriterConfig {
            seed: spec.seed,
            ..spec.rewriter
        },
        eval_seed: spec.seed,
    };
    let scorer = RuleScorer::default();
    let mut parts = PlatformParts::new(config, rules, posts, clock.clone() as Arc<dyn Clock>);
    if spec.scorer_failure_prob > 0.0 {
        parts.primary_scorer = Some(Box::new(FlakyScorer {
            inner: scorer.clone(),
            failure_prob: spec.scorer_failure_prob,
        }));
    }
    let (platform, ingest) = Platform::new(parts)?;
    let mut driver = Driver {
        spec,
        platform,
        clock: clock.clone(),
        rng: ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x51_u64 << 32)),
        scorer,
    };

    let weights: Vec<f64> = spec.groups.iter().map(|g| g.weight.max(0.0)).collect();
    let mut groups = RoundRobin::new(weights);
    let mut truth = GroundTruth::default();
    let mut challenged_rr = RoundRobin::new(vec![spec.challenged_prob, 1.0 - spec.challenged_prob]);
    for _ in 0..spec.participants {
        // Groups are dealt in enrollment order; control participants still
        // consume a slot so the deal does not depend on arm draws.
        let g = groups.next();
        let challenged = challenged_rr.next() == 0;
        let record = driver.run_participant(Some(&spec.groups[g]), challenged)?;
        truth.participants.push(record);
        driver.tick(1, 30);
    }
    let idle = (driver.platform.study().config().inactivity_timeout_minutes + 1) * 60_000;
    driver.clock.advance(idle);
    driver.platform.sweep_inactive()?;
    driver.evaluate()?;
    Ok(Simulation {
        log: driver.platform.into_log(),
        truth,
        ingest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_is_exact() {
        let mut rr = RoundRobin::new(vec![0.1552, 0.5603, 0.0603, 0.2241]);
        let mut counts = [0; 4];
        for _ in 0..116 {
            counts[rr.next()] += 1;
        }
        assert_eq!(counts, [18, 65, 7, 26]);
    }

    #[test]
    fn synthetic_posts_include_escalation_candidates() {
        let posts = synthetic_posts(50, 3, 1);
        let rules = SafetyRuleSet::bundled();
        assert_eq!(posts.iter().filter(|p| !rules.is_safe(&p.text)).count(), 3);
    }

    #[test]
    fn drafts_stay_below_positive_threshold() {
        let scorer = RuleScorer::default();
        let clock = Arc::new(ManualClock::new(Timestamp::from_millis(0)));
        let spec = PopulationSpec::default();
        let parts = PlatformParts::new(
            PlatformConfig::default(),
            SafetyRuleSet::bundled(),
            synthetic_posts(20, 0, 0),
            clock.clone(),
        );
        let (platform, _) = Platform::new(parts).unwrap();
        let mut d = Driver {
            spec: &spec,
            platform,
            clock,
            rng: ChaCha8Rng::seed_from_u64(3),
            scorer: scorer.clone(),
        };
        for _ in 0..200 {
            let draft = d.draft(1.0);
            let s = scorer.score_texts("My job has been really overwhelming and I feel alone.", &draft);
            assert!(s.total() < 5, "{draft} scored {}", s.total());
        }
    }
}
