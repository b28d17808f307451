//! C ABI over the antijam simulator.
//!
//! Every function returns an [`AjStatus`]. On failure, [`aj_last_error_message`]
//! describes the error on the calling thread. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use antijam::agent::joint_decide;
use antijam::env::{EnvConfig, Environment, HopOutcome};
use antijam::harness::{
    random_fh_oracle, run_experiment, ExperimentConfig, JammerSpec, JAMMER_SEED_OFFSET,
};
use antijam::jammer::FixedJammer;
use antijam::nn::gradcheck::run_suite;
use antijam::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Internal = 5,
}

/// Summary of one simulated hop.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AjHopResult {
    /// 1 when every slot cleared the threshold.
    pub ack: i32,
    /// Minimum SINR over the hop in dB.
    pub user_reward: f64,
    /// +1 on NACK, -1 on ACK.
    pub jammer_reward: f64,
}

/// An environment together with its fixed jammers.
pub struct AjEnvironment {
    env: Environment,
    jammers: Vec<FixedJammer>,
    history: Vec<usize>,
    last: Option<HopOutcome>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> AjStatus {
    match e {
        Error::Config { .. } | Error::TomlDe(_) | Error::TomlSer(_) => AjStatus::Config,
        Error::Io { .. } | Error::Csv(_) | Error::Metrics(_) => AjStatus::Io,
        Error::ChannelOutOfRange { .. }
        | Error::SlotCount { .. }
        | Error::Shape { .. }
        | Error::NonFinite(_) => AjStatus::InvalidArgument,
        _ => AjStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), AjStatus>) -> AjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AjStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            AjStatus::Internal
        }
    }
}

fn fail(e: Error) -> AjStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> AjStatus {
    set_error(format!("{what} is null"));
    AjStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, AjStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        AjStatus::InvalidArgument
    })
}

/// Message for the last failure on this thread, or null. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn aj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn build_env(cfg: &ExperimentConfig, seed: u64) -> Result<AjEnvironment, Error> {
    let mut env_cfg = cfg.env.clone();
    env_cfg.seed = seed;
    let jammers = cfg
        .jammers
        .iter()
        .enumerate()
        .map(|(i, j)| match j {
            JammerSpec::Fixed(f) => FixedJammer::new(
                f.clone(),
                &env_cfg,
                seed.wrapping_add(JAMMER_SEED_OFFSET).wrapping_add(i as u64),
            ),
            JammerSpec::Intelligent(_) => Err(Error::config(
                format!("jammers[{i}]"),
                "only fixed jammers can drive a bare environment",
            )),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AjEnvironment {
        env: Environment::new(env_cfg)?,
        jammers,
        history: Vec::new(),
        last: None,
    })
}

/// Creates a jammer-free desk-scale environment.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn aj_env_new_desk(seed: u64, out: *mut *mut AjEnvironment) -> AjStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = EnvConfig::desk();
        cfg.seed = seed;
        let env = Environment::new(cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(AjEnvironment {
            env,
            jammers: Vec::new(),
            history: Vec::new(),
            last: None,
        }));
        Ok(())
    })
}

/// Creates an environment from an experiment configuration in TOML. Its fixed
/// jammers act on every step.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn aj_env_from_toml(
    toml: *const c_char,
    seed: u64,
    out: *mut *mut AjEnvironment,
) -> AjStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_toml_str(text).map_err(fail)?;
        let handle = build_env(&cfg, seed).map_err(fail)?;
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// Releases an environment. Null is ignored.
///
/// # Safety
/// `env` must come from an `aj_env_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aj_env_free(env: *mut AjEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Channel count and waterfall shape.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn aj_env_dims(
    env: *const AjEnvironment,
    channels: *mut usize,
    rows: *mut usize,
    bins: *mut usize,
) -> AjStatus {
    guard(|| {
        if env.is_null() || channels.is_null() || rows.is_null() || bins.is_null() {
            return Err(null("argument"));
        }
        let c = (*env).env.config();
        *channels = c.channels;
        *rows = c.history_slots;
        *bins = c.spectrum_bins;
        Ok(())
    })
}

/// Simulates one hop with the user on `channel`.
///
/// # Safety
/// `env` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn aj_env_step(
    env: *mut AjEnvironment,
    channel: usize,
    out: *mut AjHopResult,
) -> AjStatus {
    guard(|| {
        if env.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let h = &mut *env;
        let hop = h.env.hop();
        let emissions: Vec<_> = h
            .jammers
            .iter()
            .map(|j| j.emission(hop, &h.history))
            .collect();
        let o = h.env.step_hop(channel, &emissions).map_err(fail)?;
        h.history.push(channel);
        *out = AjHopResult {
            ack: i32::from(o.ack),
            user_reward: o.user_reward,
            jammer_reward: o.jammer_reward,
        };
        h.last = Some(o);
        Ok(())
    })
}

/// Copies the current waterfall (dB, oldest row first) into `buf` of `len` values.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aj_env_waterfall(
    env: *const AjEnvironment,
    buf: *mut f64,
    len: usize,
) -> AjStatus {
    guard(|| {
        if env.is_null() || buf.is_null() {
            return Err(null("argument"));
        }
        let w: &Arc<_> = (*env).env.state();
        let data = w.as_slice();
        if len != data.len() {
            set_error(format!(
                "buffer holds {len} values, waterfall has {}",
                data.len()
            ));
            return Err(AjStatus::InvalidArgument);
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, len);
        Ok(())
    })
}

/// Copies the last hop's coarse spectrum (dB per channel) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aj_env_coarse(
    env: *const AjEnvironment,
    buf: *mut f64,
    len: usize,
) -> AjStatus {
    guard(|| {
        if env.is_null() || buf.is_null() {
            return Err(null("argument"));
        }
        let Some(o) = &(*env).last else {
            set_error("no hop has been simulated yet");
            return Err(AjStatus::InvalidArgument);
        };
        let c = o.coarse.as_slice();
        if len != c.len() {
            set_error(format!(
                "buffer holds {len} values, spectrum has {}",
                c.len()
            ));
            return Err(AjStatus::InvalidArgument);
        }
        std::ptr::copy_nonoverlapping(c.as_ptr(), buf, len);
        Ok(())
    })
}

/// Runs an experiment described in TOML and writes its metrics to `out_path`.
///
/// # Safety
/// Both strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aj_run_experiment(
    toml: *const c_char,
    out_path: *const c_char,
) -> AjStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        let path = read_str(out_path, "out_path")?;
        let mut cfg = ExperimentConfig::from_toml_str(text).map_err(fail)?;
        cfg.output_path = Some(PathBuf::from(path));
        run_experiment(&cfg).map_err(fail)?;
        Ok(())
    })
}

/// Finite-difference gradient checks over `seeds` seeds per layer kind.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn aj_gradcheck(
    base_seed: u64,
    seeds: u64,
    max_rel_error: *mut f64,
    all_passed: *mut i32,
) -> AjStatus {
    guard(|| {
        if max_rel_error.is_null() || all_passed.is_null() {
            return Err(null("argument"));
        }
        let results = run_suite(base_seed, seeds);
        *max_rel_error = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
        *all_passed = i32::from(results.iter().all(|r| r.passed()));
        Ok(())
    })
}

/// Joint decision over `len` channels.
///
/// # Safety
/// `q` and `c_hat` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn aj_joint_decide(
    q: *const f64,
    c_hat: *const f64,
    len: usize,
    out: *mut usize,
) -> AjStatus {
    guard(|| {
        if q.is_null() || c_hat.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        if len == 0 {
            set_error("len must be positive");
            return Err(AjStatus::InvalidArgument);
        }
        let q = std::slice::from_raw_parts(q, len);
        let c = std::slice::from_raw_parts(c_hat, len);
        *out = joint_decide(q, c).map_err(fail)?;
        Ok(())
    })
}

/// Monte-Carlo random hopping throughput against the fixed jammers of a TOML config.
///
/// # Safety
/// `toml` must be NUL-terminated and `throughput` valid.
#[no_mangle]
pub unsafe extern "C" fn aj_oracle_random_fh(
    toml: *const c_char,
    hops: u64,
    seed: u64,
    throughput: *mut f64,
) -> AjStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        if throughput.is_null() {
            return Err(null("throughput"));
        }
        let cfg = ExperimentConfig::from_toml_str(text).map_err(fail)?;
        let fixed = cfg
            .jammers
            .iter()
            .map(|j| match j {
                JammerSpec::Fixed(f) => Ok(f.clone()),
                JammerSpec::Intelligent(_) => Err(Error::config("jammers", "fixed jammers only")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        *throughput = random_fh_oracle(&cfg.env, &fixed, hops, seed)
            .map_err(fail)?
            .monte_carlo;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        let p = aj_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn environment_lifecycle() {
        unsafe {
            let mut h: *mut AjEnvironment = std::ptr::null_mut();
            assert_eq!(aj_env_new_desk(3, &mut h), AjStatus::Ok);
            let (mut c, mut r, mut b) = (0, 0, 0);
            assert_eq!(aj_env_dims(h, &mut c, &mut r, &mut b), AjStatus::Ok);
            assert_eq!((c, r, b), (10, 40, 40));
            let mut out = AjHopResult::default();
            assert_eq!(aj_env_step(h, 4, &mut out), AjStatus::Ok);
            assert_eq!(out.ack, 1);
            assert_eq!(out.jammer_reward, -1.0);
            let mut w = vec![0.0; 1600];
            assert_eq!(aj_env_waterfall(h, w.as_mut_ptr(), w.len()), AjStatus::Ok);
            assert!(w[1600 - 40 + 16] > w[0]);
            assert_eq!(
                aj_env_waterfall(h, w.as_mut_ptr(), 5),
                AjStatus::InvalidArgument
            );
            let mut cg = [0.0; 10];
            assert_eq!(aj_env_coarse(h, cg.as_mut_ptr(), 10), AjStatus::Ok);
            assert!((cg[4] - 10.0 * 1001f64.log10()).abs() < 1e-12);
            assert_eq!(aj_env_step(h, 10, &mut out), AjStatus::InvalidArgument);
            assert!(message().contains("channel"));
            aj_env_free(h);
        }
    }

    #[test]
    fn toml_environment_applies_fixed_jammers() {
        let toml =
            CString::new("[[jammers]]\nkind = \"fixed\"\nmode = \"comb\"\ncomb_channels = [2]\n")
                .unwrap();
        unsafe {
            let mut h = std::ptr::null_mut();
            assert_eq!(aj_env_from_toml(toml.as_ptr(), 1, &mut h), AjStatus::Ok);
            let mut out = AjHopResult::default();
            aj_env_step(h, 2, &mut out);
            assert_eq!(out.ack, 0);
            aj_env_step(h, 3, &mut out);
            assert_eq!(out.ack, 1);
            aj_env_free(h);
            let bad = CString::new("trials = 0").unwrap();
            assert_eq!(aj_env_from_toml(bad.as_ptr(), 1, &mut h), AjStatus::Config);
            assert!(message().contains("trials"));
        }
    }

    #[test]
    fn null_and_decision_paths() {
        unsafe {
            assert_eq!(
                aj_env_new_desk(0, std::ptr::null_mut()),
                AjStatus::NullPointer
            );
            let q = [1.0, 1.0];
            let c = [10.0, 0.0];
            let mut a = 99;
            assert_eq!(
                aj_joint_decide(q.as_ptr(), c.as_ptr(), 2, &mut a),
                AjStatus::Ok
            );
            assert_eq!(a, 1);
            let nan = [f64::NAN, 0.0];
            assert_eq!(
                aj_joint_decide(nan.as_ptr(), c.as_ptr(), 2, &mut a),
                AjStatus::InvalidArgument
            );
            let (mut err, mut ok) = (1.0, 0);
            assert_eq!(aj_gradcheck(0, 2, &mut err, &mut ok), AjStatus::Ok);
            assert_eq!(ok, 1);
            assert!(err < 1e-4);
            let toml = CString::new("[[jammers]]\nkind = \"fixed\"\nmode = \"sweep\"\n").unwrap();
            let mut thr = 0.0;
            assert_eq!(
                aj_oracle_random_fh(toml.as_ptr(), 5000, 1, &mut thr),
                AjStatus::Ok
            );
            assert!((thr - 0.7).abs() < 0.03);
            assert!(!aj_version().is_null());
        }
    }

    #[test]
    fn experiment_writes_metrics() {
        let dir = std::env::temp_dir().join(format!("antijam-ffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("m.csv");
        let toml = CString::new("agent = \"random_fh\"\nepisodes = 2\ntrials = 1\n").unwrap();
        let path = CString::new(out.to_str().unwrap()).unwrap();
        unsafe {
            assert_eq!(
                aj_run_experiment(toml.as_ptr(), path.as_ptr()),
                AjStatus::Ok
            );
        }
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("schema_version,"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
