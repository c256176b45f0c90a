use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use priorrm::experiments::{run_ensemble, Scenario, StartMode};
use priorrm::priors::{kde_from_samples, Prior};
use priorrm_ffi::*;

fn new_prior(f: impl FnOnce(*mut *mut PrmPrior) -> PrmStatus) -> *mut PrmPrior {
    let mut p = ptr::null_mut();
    assert_eq!(f(&mut p), PrmStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn ensemble_matches_library() {
    let mut sc = std::mem::MaybeUninit::<PrmScenario>::uninit();
    let mut sc = unsafe {
        assert_eq!(prm_scenario_default(sc.as_mut_ptr()), PrmStatus::Ok);
        sc.assume_init()
    };
    sc.runs = 500;
    sc.iterations = 8;
    sc.start_mode = PrmStartMode::Uniform;
    sc.seed = 11;

    let samples = [0.2, 0.4, 0.5, 0.9];
    let kde = new_prior(|p| unsafe { prm_prior_kde(samples.as_ptr(), samples.len(), 0.1, p) });
    let mut med = [0.0; 8];
    let (mut runs, mut div) = (0usize, 0usize);
    let st = unsafe { prm_run_ensemble(&sc, kde, med.as_mut_ptr(), 8, &mut runs, &mut div) };
    assert_eq!(st, PrmStatus::Ok);

    let lib = run_ensemble(&Scenario {
        runs: 500,
        iterations: 8,
        start_mode: StartMode::Uniform,
        seed: 11,
        prior: Some(Prior::Mixture(kde_from_samples(&samples, 0.1).unwrap())),
        ..Scenario::default()
    })
    .unwrap();
    assert_eq!(med.to_vec(), lib.median_abs_dev);
    assert_eq!((runs, div), (lib.runs, lib.divergent));
    unsafe { prm_prior_free(kde) };
}

#[test]
fn steps_and_densities() {
    let u = new_prior(|p| unsafe { prm_prior_uniform(p) });
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        assert_eq!(prm_standard_step(3, 2.0, 1.5, 0.5, 0.9, &mut a), PrmStatus::Ok);
        assert_eq!(prm_prior_step(u, 3, 2.0, 1.5, 0.5, 0.9, 0.7, ptr::null(), &mut b), PrmStatus::Ok);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(prm_rm_proposal(3, 2.0, 1.5, 0.5, 0.9, &mut b), PrmStatus::Ok);
        assert_eq!(a, b);
        prm_prior_free(u);
    }

    let g = [0.0, 1.0, 2.0];
    let l = [0.0, 1.0, 1.0];
    let t = new_prior(|p| unsafe { prm_prior_tabulated(g.as_ptr(), l.as_ptr(), 3, f64::NAN, p) });
    let mut v = 0.0;
    unsafe {
        assert_eq!(prm_prior_log_density(t, 0.25, &mut v), PrmStatus::Ok);
        assert_eq!(v, 0.25);
        assert_eq!(prm_prior_log_density(t, 3.0, &mut v), PrmStatus::Domain);
        let msg = CStr::from_ptr(prm_last_error_message()).to_str().unwrap();
        assert!(!msg.is_empty());
        let tight = PrmArgmaxOptions { abs_tol: 1e-10, max_evals: 1 };
        assert_eq!(prm_prior_step(t, 1, 0.5, 0.0, 0.0, 1.0, 1.0, &tight, &mut v), PrmStatus::Convergence);
        prm_prior_free(t);
    }

    let w = [0.5, 0.6];
    let m = [0.0, 1.0];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { prm_prior_mixture(w.as_ptr(), m.as_ptr(), 2, 1.0, &mut p) }, PrmStatus::Domain);
    assert_eq!(unsafe { prm_prior_mixture(ptr::null(), m.as_ptr(), 2, 1.0, &mut p) }, PrmStatus::NullPointer);
    assert!(p.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/priorrm.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct PrmPrior PrmPrior;"));
}

/// Directory holding the library artifacts of this build.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler ({cc}); skipping");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // integration tests only link the rlib; ask for the archive explicitly
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let built = Command::new(cargo)
        .args(["build", "--quiet", "--lib", "-p", "priorrm-ffi", "--profile", "test"])
        .current_dir(manifest)
        .status()
        .unwrap();
    assert!(built.success(), "building the static library failed");
    let lib = artifact_dir().join("libpriorrm_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
