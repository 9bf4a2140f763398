use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::events::{EventLog, EventPayload, InteractionEvent, SurveyKind};
use super::forms::StudyForms;
use super::types::{Answers, Participant, Phase, Post, PostPool, PostSubset, StudyArm};
use super::StudyError;
use crate::clock::{Clock, Timestamp};

pub const POSTS_PER_SUBSET: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Enrollment weights in `StudyArm::ALL` order.
    pub arm_weights: [f64; 3],
    pub seed: u64,
    /// Upper bound on the number of post subsets carved from the pool.
    pub max_subsets: usize,
    pub inactivity_timeout_minutes: i64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            arm_weights: [0.45, 0.45, 0.10],
            seed: 0,
            max_subsets: 150,
            inactivity_timeout_minutes: 60,
        }
    }
}

/// What a participant hands in to leave their current phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum PhasePayload {
    PreSurvey { answers: Answers },
    Training { acknowledged: bool },
    Responding,
    PostSurvey { answers: Answers },
}

impl PhasePayload {
    fn phase(&self) -> Phase {
        match self {
            PhasePayload::PreSurvey { .. } => Phase::PreSurvey,
            PhasePayload::Training { .. } => Phase::Training,
            PhasePayload::Responding => Phase::Responding,
            PhasePayload::PostSurvey { .. } => Phase::PostSurvey,
        }
    }
}

fn next_phase(phase: Phase) -> Option<Phase> {
    match phase {
        Phase::PreSurvey => Some(Phase::Training),
        Phase::Training => Some(Phase::Responding),
        Phase::Responding => Some(Phase::PostSurvey),
        Phase::PostSurvey => Some(Phase::Complete),
        Phase::Complete | Phase::DroppedOut => None,
    }
}

pub struct Study {
    config: StudyConfig,
    forms: StudyForms,
    pool: PostPool,
    subsets: Vec<PostSubset>,
    participants: BTreeMap<String, Participant>,
    last_active: HashMap<String, Timestamp>,
    subset_usage: Vec<usize>,
    arm_subset_usage: [Vec<usize>; 3],
    arm_dist: Option<WeightedIndex<f64>>,
    rng: ChaCha8Rng,
    log: EventLog,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Study")
            .field("participants", &self.participants.len())
            .field("subsets", &self.subsets.len())
            .field("log", &self.log)
            .finish()
    }
}

impl Study {
    /// Partitions the admitted pool into subsets of ten and prepares the
    /// seeded arm generator. Fails if the pool cannot fill a single subset.
    pub fn new(
        config: StudyConfig,
        forms: StudyForms,
        pool: PostPool,
        log: EventLog,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StudyError> {
        if config.arm_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || config.arm_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(StudyError::Validation(format!(
                "arm weights must be non-negative with a positive sum: {:?}",
                config.arm_weights
            )));
        }
        let mut subsets = pool.partition(POSTS_PER_SUBSET, config.seed);
        subsets.truncate(config.max_subsets);
        if subsets.is_empty() {
            return Err(StudyError::Validation(format!(
                "post pool of {} cannot fill a subset of {POSTS_PER_SUBSET}",
                pool.len()
            )));
        }
        let arm_dist = WeightedIndex::new(config.arm_weights).ok();
        let n = subsets.len();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            forms,
            pool,
            subsets,
            participants: BTreeMap::new(),
            last_active: HashMap::new(),
            subset_usage: vec![0; n],
            arm_subset_usage: [vec![0; n], vec![0; n], vec![0; n]],
            arm_dist,
            log,
            clock,
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn forms(&self) -> &StudyForms {
        &self.forms
    }

    pub fn pool(&self) -> &PostPool {
        &self.pool
    }

    pub fn subsets(&self) -> &[PostSubset] {
        &self.subsets
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn participants(&self) -> impl Iterator<Item = &Participant> {
        self.participants.values()
    }

    pub fn participant(&self, id: &str) -> Result<&Participant, StudyError> {
        self.participants
            .get(id)
            .ok_or_else(|| StudyError::NotFound(format!("participant {id}")))
    }

    /// The ten posts served to a participant, in serving order.
    pub fn assigned_posts(&self, id: &str) -> Result<Vec<&Post>, StudyError> {
        let p = self.participant(id)?;
        self.subsets[p.post_subset_id]
            .post_ids
            .iter()
            .map(|pid| {
                self.pool
                    .get(pid)
                    .ok_or_else(|| StudyError::NotFound(format!("post {pid}")))
            })
            .collect()
    }

    fn draw_arm(&mut self) -> StudyArm {
        match &self.arm_dist {
            Some(dist) => StudyArm::ALL[dist.sample(&mut self.rng)],
            None => StudyArm::HumanOnly,
        }
    }

    /// Least globally used subset, ties broken by least used within the arm
    /// and then by id, so arms walk the same subsets.
    fn pick_subset(&self, arm: StudyArm) -> usize {
        let arm_usage = &self.arm_subset_usage[arm.index()];
        (0..self.subsets.len())
            .min_by_key(|&i| (self.subset_usage[i], arm_usage[i], i))
            .expect("at least one subset")
    }

    pub fn enroll(&mut self, demographics: Answers) -> Result<Participant, StudyError> {
        self.forms.demographics.validate(&demographics)?;
        let arm = self.draw_arm();
        let subset = self.pick_subset(arm);
        self.subset_usage[subset] += 1;
        self.arm_subset_usage[arm.index()][subset] += 1;
        let participant = Participant {
            id: format!("P{:05}", self.participants.len() + 1),
            arm,
            post_subset_id: subset,
            phase: Phase::PreSurvey,
            pre_survey: Answers::new(),
            post_survey: Answers::new(),
            demographics: demographics.clone(),
        };
        self.participants
            .insert(participant.id.clone(), participant.clone());
        self.append(
            &participant.id,
            None,
            None,
            EventPayload::Enrolled {
                arm,
                post_subset_id: subset,
                demographics,
            },
        )?;
        Ok(participant)
    }

    pub fn advance_phase(&mut self, id: &str, payload: PhasePayload) -> Result<Participant, StudyError> {
        let current = self.participant(id)?.phase;
        if payload.phase() != current {
            return Err(StudyError::PhaseViolation(format!(
                "{id} is in {current:?}, payload is for {:?}",
                payload.phase()
            )));
        }
        let to = next_phase(current)
            .ok_or_else(|| StudyError::PhaseViolation(format!("{id} has finished ({current:?})")))?;
        match &payload {
            PhasePayload::PreSurvey { answers } => {
                self.forms.pre_survey.validate(answers)?;
                self.append(id, None, None, EventPayload::SurveySubmitted {
                    survey: SurveyKind::Pre,
                    answers: answers.clone(),
                })?;
            }
            PhasePayload::Training { acknowledged } => {
                if !acknowledged {
                    return Err(StudyError::Validation("training must be acknowledged".into()));
                }
            }
            PhasePayload::Responding => {
                let done = self.log.responses_submitted(id);
                if done != POSTS_PER_SUBSET {
                    return Err(StudyError::PhaseViolation(format!(
                        "{id} has submitted {done} of {POSTS_PER_SUBSET} responses"
                    )));
                }
            }
            PhasePayload::PostSurvey { answers } => {
                self.forms.post_survey.validate(answers)?;
                self.append(id, None, None, EventPayload::SurveySubmitted {
                    survey: SurveyKind::Post,
                    answers: answers.clone(),
                })?;
            }
        }
        self.append(id, None, None, EventPayload::PhaseAdvanced { from: current, to })?;
        let p = self.participants.get_mut(id).expect("checked above");
        match payload {
            PhasePayload::PreSurvey { answers } => p.pre_survey = answers,
            PhasePayload::PostSurvey { answers } => p.post_survey = answers,
            _ => {}
        }
        p.phase = to;
        Ok(p.clone())
    }

    /// Appends an event on behalf of a participant. Response-scoped events
    /// are only accepted during the Responding phase.
    pub fn record(&mut self, event: InteractionEvent) -> Result<u64, StudyError> {
        let phase = self.participant(&event.participant_id)?.phase;
        if event.payload.is_response_scoped() && phase != Phase::Responding {
            return Err(StudyError::PhaseViolation(format!(
                "{} event while {} is in {phase:?}",
                event.payload.type_name(),
                event.participant_id
            )));
        }
        if let Some(i) = event.post_index {
            if i >= POSTS_PER_SUBSET {
                return Err(StudyError::Validation(format!("post_index {i} out of range")));
            }
        }
        self.append_event(event)
    }

    /// Appends an event for an actor that is not an enrolled participant
    /// (escalations, evaluator judgments).
    pub fn record_external(&mut self, event: InteractionEvent) -> Result<u64, StudyError> {
        if self.participants.contains_key(&event.participant_id) {
            return Err(StudyError::Validation(format!(
                "{} is a participant; use record",
                event.participant_id
            )));
        }
        self.append_event(event)
    }

    fn append(
        &mut self,
        id: &str,
        session_id: Option<String>,
        post_index: Option<usize>,
        payload: EventPayload,
    ) -> Result<u64, StudyError> {
        let event = InteractionEvent::new(self.clock.now(), id, session_id, post_index, payload);
        self.append_event(event)
    }

    fn append_event(&mut self, event: InteractionEvent) -> Result<u64, StudyError> {
        let pid = event.participant_id.clone();
        let ts = event.timestamp;
        let offset = self.log.append(event)?;
        if self.participants.contains_key(&pid) {
            self.last_active.insert(pid, ts);
        }
        Ok(offset)
    }

    /// Moves a participant to DroppedOut from any unfinished phase.
    pub fn drop_out(&mut self, id: &str) -> Result<Participant, StudyError> {
        let current = self.participant(id)?.phase;
        if matches!(current, Phase::Complete | Phase::DroppedOut) {
            return Err(StudyError::PhaseViolation(format!("{id} is already {current:?}")));
        }
        self.append(id, None, None, EventPayload::PhaseAdvanced {
            from: current,
            to: Phase::DroppedOut,
        })?;
        let p = self.participants.get_mut(id).expect("checked above");
        p.phase = Phase::DroppedOut;
        Ok(p.clone())
    }

    /// Drops every unfinished participant idle for longer than the
    /// inactivity timeout. Returns the ids dropped, in id order.
    pub fn sweep_inactive(&mut self) -> Result<Vec<String>, StudyError> {
        let now = self.clock.now();
        let limit = self.config.inactivity_timeout_minutes * 60_000;
        let stale: Vec<String> = self
            .participants
            .values()
            .filter(|p| !matches!(p.phase, Phase::Complete | Phase::DroppedOut))
            .filter(|p| {
                self.last_active
                    .get(&p.id)
                    .is_some_and(|t| now.millis() - t.millis() > limit)
            })
            .map(|p| p.id.clone())
            .collect();
        for id in &stale {
            self.drop_out(id)?;
        }
        Ok(stale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::study::types::Answer;

    fn pool(n: usize) -> PostPool {
        PostPool::new(
            (0..n)
                .map(|i| Post {
                    id: format!("post{i}"),
                    text: format!("Seeker post number {i}."),
                })
                .collect(),
        )
        .unwrap()
    }

    fn demographics() -> Answers {
        [
            ("age_range", "25-34"),
            ("gender", "prefer_not_to_say"),
            ("first_language_english", "yes"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), Answer::Text(v.into())))
        .collect()
    }

    fn study(weights: [f64; 3], seed: u64, posts: usize) -> (Study, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(Timestamp::from_millis(0)));
        let config = StudyConfig {
            arm_weights: weights,
            seed,
            ..StudyConfig::default()
        };
        let s = Study::new(config, StudyForms::bundled(), pool(posts), EventLog::new(), clock.clone()).unwrap();
        (s, clock)
    }

    #[test]
    fn arm_proportions_follow_weights() {
        let (mut s, _) = study([0.45, 0.45, 0.10], 11, 1500);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[s.enroll(demographics()).unwrap().arm.index()] += 1;
        }
        for (c, w) in counts.iter().zip([0.45, 0.45, 0.10]) {
            let share = *c as f64 / 10_000.0;
            assert!((share - w).abs() < 0.015, "{counts:?}");
        }
    }

    #[test]
    fn degenerate_weights() {
        let (mut s, _) = study([1.0, 0.0, 0.0], 1, 100);
        assert!((0..50).all(|_| s.enroll(demographics()).unwrap().arm == StudyArm::HumanOnly));
    }

    #[test]
    fn three_hundred_enrollments_use_each_subset_twice() {
        let (mut s, _) = study([0.5, 0.5, 0.0], 2, 1500);
        for _ in 0..300 {
            s.enroll(demographics()).unwrap();
        }
        assert_eq!(s.subsets().len(), 150);
        assert!(s.subset_usage.iter().all(|&u| u == 2));
    }

    #[test]
    fn alternating_arms_cover_identical_subsets() {
        let (mut s, _) = study([0.5, 0.5, 0.0], 5, 1500);
        for _ in 0..300 {
            s.enroll(demographics()).unwrap();
        }
        let covered = |arm: StudyArm| {
            s.participants()
                .filter(|p| p.arm == arm)
                .map(|p| p.post_subset_id)
                .collect::<std::collections::BTreeSet<_>>()
        };
        let overlap = covered(StudyArm::HumanOnly)
            .intersection(&covered(StudyArm::HumanPlusRewriting))
            .count();
        let smaller = covered(StudyArm::HumanOnly).len().min(covered(StudyArm::HumanPlusRewriting).len());
        assert_eq!(overlap, smaller);
    }

    fn pre() -> PhasePayload {
        let answers = [
            ("peer_support_experience", Answer::Text("some".into())),
            ("writing_challenging", Answer::Text("challenging".into())),
            ("confidence_writing", Answer::Level(3)),
            ("feedback_openness", Answer::Level(4)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        PhasePayload::PreSurvey { answers }
    }

    fn submit(s: &mut Study, id: &str, i: usize) -> Result<u64, StudyError> {
        let post_id = s.assigned_posts(id).unwrap()[i].id.clone();
        let ev = InteractionEvent::new(
            s.now(),
            id,
            Some("s".into()),
            Some(i),
            EventPayload::ResponseSubmitted {
                post_id,
                seeker_post: "x".into(),
                text: "I hear you.".into(),
            },
        );
        s.record(ev)
    }

    #[test]
    fn full_phase_walk() {
        let (mut s, _) = study([1.0, 0.0, 0.0], 3, 100);
        let id = s.enroll(demographics()).unwrap().id;
        assert!(matches!(
            s.advance_phase(&id, PhasePayload::Training { acknowledged: true }),
            Err(StudyError::PhaseViolation(_))
        ));
        assert!(submit(&mut s, &id, 0).is_err(), "responses before Responding");
        s.advance_phase(&id, pre()).unwrap();
        s.advance_phase(&id, PhasePayload::Training { acknowledged: true }).unwrap();
        for i in 0..9 {
            submit(&mut s, &id, i).unwrap();
        }
        assert!(s.advance_phase(&id, PhasePayload::Responding).is_err());
        submit(&mut s, &id, 9).unwrap();
        assert!(submit(&mut s, &id, 3).is_err(), "second submission for post 3");
        assert_eq!(s.advance_phase(&id, PhasePayload::Responding).unwrap().phase, Phase::PostSurvey);
        let post = [("confidence_writing".to_string(), Answer::Level(4))].into_iter().collect();
        let done = s.advance_phase(&id, PhasePayload::PostSurvey { answers: post }).unwrap();
        assert_eq!(done.phase, Phase::Complete);
        assert!(s.drop_out(&id).is_err());
    }

    #[test]
    fn inactivity_sweep_drops_idle_participants() {
        let (mut s, clock) = study([1.0, 0.0, 0.0], 3, 100);
        let idle = s.enroll(demographics()).unwrap().id;
        let busy = s.enroll(demographics()).unwrap().id;
        s.advance_phase(&idle, pre()).unwrap();
        s.advance_phase(&idle, PhasePayload::Training { acknowledged: true }).unwrap();
        clock.advance(45 * 60_000);
        s.advance_phase(&busy, pre()).unwrap();
        clock.advance(20 * 60_000);
        assert_eq!(s.sweep_inactive().unwrap(), vec![idle.clone()]);
        assert_eq!(s.participant(&idle).unwrap().phase, Phase::DroppedOut);
        assert_eq!(s.participant(&busy).unwrap().phase, Phase::Training);
    }

    #[test]
    fn pool_too_small() {
        let clock = Arc::new(ManualClock::new(Timestamp::from_millis(0)));
        assert!(Study::new(StudyConfig::default(), StudyForms::bundled(), pool(9), EventLog::new(), clock).is_err());
    }
}
