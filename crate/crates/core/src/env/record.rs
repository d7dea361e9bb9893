use super::{Env, EnvError, EnvSettings, Policy, StateVector, REWARD_WINDOW};
use serde::{Deserialize, Serialize};
use std::io::BufRead;

/// One environment step `(s, a, r, s', done)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: StateVector,
    pub a: f64,
    pub r: f64,
    pub s_next: StateVector,
    pub done: bool,
}

/// A complete episode with its return and binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub settings: EnvSettings,
    pub transitions: Vec<Transition>,
    pub total_return: u32,
    pub attach_step: Option<usize>,
    pub closest_step: usize,
    pub toppled: bool,
}

impl EpisodeRecord {
    /// Success means the full reward window was collected.
    pub fn outcome(&self) -> bool {
        self.total_return as usize == REWARD_WINDOW
    }

    /// Step at which the hand reached the object: the attach step if any,
    /// otherwise the step of minimum hand-object distance.
    pub fn time_of_reach(&self) -> usize {
        self.attach_step.unwrap_or(self.closest_step)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// One JSON object: settings, per-step `(s, a, r)`, return and outcome.
    pub fn to_log_line(&self) -> String {
        let line = LogLine {
            settings: self.settings,
            steps: self.transitions.iter().map(|t| LogStep { s: t.s, a: t.a, r: t.r }).collect(),
            final_state: self.transitions.last().map(|t| t.s_next),
            sum_reward: self.total_return,
            outcome: u8::from(self.outcome()),
            attach_step: self.attach_step,
            closest_step: self.closest_step,
            toppled: self.toppled,
        };
        serde_json::to_string(&line).expect("episode serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct LogStep {
    s: StateVector,
    a: f64,
    r: f64,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    settings: EnvSettings,
    steps: Vec<LogStep>,
    final_state: Option<StateVector>,
    #[serde(rename = "return")]
    sum_reward: u32,
    outcome: u8,
    attach_step: Option<usize>,
    closest_step: usize,
    toppled: bool,
}

/// Read an episode log written with [`EpisodeRecord::to_log_line`].
pub fn read_episode_log<R: BufRead>(reader: R) -> Result<Vec<EpisodeRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: LogLine = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        let n = l.steps.len();
        let transitions = (0..n)
            .map(|k| Transition {
                s: l.steps[k].s,
                a: l.steps[k].a,
                r: l.steps[k].r,
                s_next: if k + 1 < n { l.steps[k + 1].s } else { l.final_state.unwrap_or(l.steps[k].s) },
                done: k + 1 == n,
            })
            .collect();
        out.push(EpisodeRecord {
            settings: l.settings,
            transitions,
            total_return: l.sum_reward,
            attach_step: l.attach_step,
            closest_step: l.closest_step,
            toppled: l.toppled,
        });
    }
    Ok(out)
}

/// Run `policy` for one full episode.
pub fn rollout<P: Policy + ?Sized>(
    env: &mut Env,
    settings: &EnvSettings,
    policy: &mut P,
) -> Result<EpisodeRecord, EnvError> {
    let mut obs = env.reset(settings)?;
    let mut transitions = Vec::with_capacity(env.path_len() + REWARD_WINDOW);
    let mut total = 0.0;
    loop {
        let state = *env.state().expect("reset succeeded");
        let a = policy.act(&state, &obs);
        let out = env.step(a)?;
        let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
        transitions.push(Transition { s: obs, a, r: out.reward, s_next: out.obs, done: out.done });
        total += out.reward;
        obs = out.obs;
        if out.done {
            break;
        }
    }
    Ok(EpisodeRecord {
        settings: *settings,
        transitions,
        total_return: total as u32,
        attach_step: env.attach_step(),
        closest_step: env.closest_step(),
        toppled: env.state().map(|s| s.toppled).unwrap_or(false),
    })
}
