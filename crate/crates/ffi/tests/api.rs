use std::ffi::CStr;
use std::ptr;

use techmix_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tm_last_error()) }.to_string_lossy().into_owned()
}

/// Small deterministic LCG so the tests need no RNG dependency.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
}

/// y = 2 x0 + noise with three candidate columns, one year per 10 rows.
fn design() -> *mut TmDesign {
    let n = 60;
    let mut r = Lcg(7);
    let x: Vec<f64> = (0..3 * n).map(|_| r.next()).collect();
    let y: Vec<f64> = (0..n).map(|i| 2.0 * x[i] + 0.1 * r.next()).collect();
    let years: Vec<i32> = (0..n as i32).map(|i| 2000 + i / 10).collect();
    let mut d = ptr::null_mut();
    let s = unsafe { tm_design_new(y.as_ptr(), x.as_ptr(), years.as_ptr(), n, 3, ptr::null(), &mut d) };
    assert_eq!(s, TmStatus::Ok, "{}", last_error());
    d
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(tm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn dtw_matches_engine() {
    let a = [0.0, 1.0, 2.0, 3.0, 1.0, 0.5];
    let b = [0.0, 2.0, 2.5, 0.0];
    let mut out = 0.0;
    let s = unsafe { tm_dtw_distance(a.as_ptr(), 3, b.as_ptr(), 2, 2, -1, false, &mut out) };
    assert_eq!(s, TmStatus::Ok);
    let ra: Vec<&[f64]> = a.chunks(2).collect();
    let rb: Vec<&[f64]> = b.chunks(2).collect();
    let want = techmix::cluster::dtw_series(&ra, &rb, Default::default()).unwrap();
    assert_eq!(out, want);

    let s = unsafe { tm_dtw_distance(a.as_ptr(), 3, b.as_ptr(), 2, 2, 0, false, &mut out) };
    assert_eq!(s, TmStatus::Window);
    assert!(last_error().contains("band"));
}

#[test]
fn log_ml_and_bma() {
    let d = design();
    let mut lml = 0.0;
    let cols = [0usize];
    let s = unsafe { tm_log_marginal_likelihood(d, cols.as_ptr(), 1, TM_PRIOR_UIP, f64::NAN, &mut lml) };
    assert_eq!(s, TmStatus::Ok);
    assert!(lml > 10.0);

    let mut opts = unsafe { std::mem::zeroed::<TmBmaOptions>() };
    assert_eq!(unsafe { tm_bma_default_options(&mut opts) }, TmStatus::Ok);
    assert_eq!((opts.iters, opts.burnin, opts.g_prior), (200_000, 20_000, TM_PRIOR_HYPER_UIP));
    opts.sampler = TM_SAMPLER_ENUMERATE;
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { tm_bma_run(d, &opts, &mut res) }, TmStatus::Ok, "{}", last_error());
    let k = unsafe { tm_bma_n_vars(res) };
    assert_eq!(k, 3);
    assert!(unsafe { tm_bma_n_models(res) } >= 1);
    let mut pip = vec![0.0; k];
    let mut mean = vec![0.0; k];
    let mut sd = vec![0.0; k];
    unsafe {
        assert_eq!(tm_bma_pip(res, pip.as_mut_ptr(), k), TmStatus::Ok);
        assert_eq!(tm_bma_post_mean(res, mean.as_mut_ptr(), k), TmStatus::Ok);
        assert_eq!(tm_bma_post_sd(res, sd.as_mut_ptr(), k), TmStatus::Ok);
        assert_eq!(tm_bma_pip(res, pip.as_mut_ptr(), 2), TmStatus::InvalidArgument);
    }
    assert!(pip[0] > 0.999 && (mean[0] - 2.0).abs() < 0.1 && sd[0] > 0.0);
    assert!(pip.iter().all(|p| (0.0..=1.0).contains(p)));

    opts.model_prior = 9;
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { tm_bma_run(d, &opts, &mut other) }, TmStatus::InvalidArgument);
    assert!(other.is_null());
    unsafe {
        tm_bma_free(res);
        tm_design_free(d);
    }
}

#[test]
fn hac_and_cut() {
    // two tight pairs far apart
    let p: [f64; 4] = [0.0, 0.1, 5.0, 5.3];
    let dist: Vec<f64> = (0..16).map(|x| (p[x / 4] - p[x % 4]).abs()).collect();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { tm_hac_average(dist.as_ptr(), 4, &mut d) }, TmStatus::Ok);
    assert_eq!(unsafe { tm_dendrogram_n_merges(d) }, 3);
    let (mut l, mut r, mut h) = ([0usize; 3], [0usize; 3], [0.0f64; 3]);
    let s = unsafe { tm_dendrogram_merges(d, l.as_mut_ptr(), r.as_mut_ptr(), h.as_mut_ptr(), 3) };
    assert_eq!(s, TmStatus::Ok);
    assert_eq!((l[0], r[0]), (0, 1));
    assert!((h[0] - 0.1).abs() < 1e-15 && (h[1] - 0.3).abs() < 1e-12);
    let mut labels = [9usize; 4];
    assert_eq!(unsafe { tm_dendrogram_cut(d, 2, labels.as_mut_ptr(), 4) }, TmStatus::Ok);
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[2], labels[3]);
    assert_ne!(labels[0], labels[2]);
    assert_eq!(unsafe { tm_dendrogram_cut(d, 9, labels.as_mut_ptr(), 4) }, TmStatus::Input);
    unsafe { tm_dendrogram_free(d) };
}

#[test]
fn null_pointers_and_error_reset() {
    let mut out = 0.0;
    let a = [1.0];
    assert_eq!(
        unsafe { tm_dtw_distance(ptr::null(), 1, a.as_ptr(), 1, 1, -1, false, &mut out) },
        TmStatus::NullPointer
    );
    assert!(last_error().contains("`a`"));
    assert_eq!(unsafe { tm_dtw_distance(a.as_ptr(), 1, a.as_ptr(), 1, 1, -1, false, &mut out) }, TmStatus::Ok);
    assert_eq!(last_error(), "");
    assert_eq!(unsafe { tm_bma_n_vars(ptr::null()) }, 0);
    unsafe { tm_design_free(ptr::null_mut()) };
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/techmix.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler; skipping header check");
        return;
    };
    assert!(status.success());
}
