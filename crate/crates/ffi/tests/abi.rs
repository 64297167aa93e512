use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fracdiff_ffi::*;

const CFG: &str = "[problem]\nL = pi\nM = 64\nN = 8\nalphas = 0.6\na = sin(x)\nT = 1\nK = 32\n";

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { fd_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn model(cfg: &str) -> (FdStatus, *mut FdModel) {
    let text = CString::new(cfg).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { fd_model_from_str(text.as_ptr(), &mut m) };
    (s, m)
}

#[test]
fn ml_eval_matches_closed_forms() {
    let (mut re, mut im) = (0.0, 0.0);
    unsafe {
        assert_eq!(fd_ml_eval(1.0, 1.0, 0.0, std::f64::consts::PI, &mut re, &mut im), FdStatus::Ok);
        assert!((re + 1.0).abs() < 1e-14 && im.abs() < 1e-14);
        assert_eq!(fd_ml_eval(2.0, 1.0, -2.25, 0.0, &mut re, &mut im), FdStatus::Ok);
        assert!((re - 1.5f64.cos()).abs() < 1e-12);
    }
}

#[test]
fn bad_arguments_report_codes_and_messages() {
    let (mut re, mut im) = (0.0, 0.0);
    unsafe {
        assert_eq!(fd_ml_eval(0.0, 1.0, 1.0, 0.0, &mut re, &mut im), FdStatus::InvalidArgument);
        assert!(last_error().contains("alpha"), "{}", last_error());
        assert_eq!(fd_ml_eval(1.0, 1.0, 1.0, 0.0, ptr::null_mut(), &mut im), FdStatus::NullPointer);
        let mut m = ptr::null_mut();
        assert_eq!(fd_model_from_str(ptr::null(), &mut m), FdStatus::NullPointer);
        assert!(m.is_null());
        let path = CString::new("/nonexistent/model.cfg").unwrap();
        assert_eq!(fd_model_from_file(path.as_ptr(), &mut m), FdStatus::Config);
        fd_model_free(ptr::null_mut());
        fd_solution_free(ptr::null_mut());
    }
    let (s, m) = model(&format!("{CFG}bogus = 1\n"));
    assert_eq!(s, FdStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("bogus"), "{}", last_error());
}

#[test]
fn solve_and_read_back() {
    let (s, m) = model(CFG);
    assert_eq!(s, FdStatus::Ok);
    unsafe {
        assert_eq!(fd_model_modes(m), 8);
        assert_eq!(fd_model_nodes(m), 65);
        let mut lam = [0.0; 8];
        assert_eq!(fd_model_eigenvalues(m, lam.as_mut_ptr(), 8), FdStatus::Ok);
        assert!((lam[0] - 1.0).abs() < 1e-3 && lam.windows(2).all(|w| w[0] < w[1]));
        let mut small = [0.0; 4];
        assert_eq!(fd_model_eigenvalues(m, small.as_mut_ptr(), 4), FdStatus::BufferTooSmall);

        let mut sol = ptr::null_mut();
        assert_eq!(fd_solve(m, &mut sol), FdStatus::Ok);
        let k = fd_solution_times_len(sol);
        assert_eq!(k, 33);
        let mut t = vec![0.0; k];
        assert_eq!(fd_solution_times(sol, t.as_mut_ptr(), k), FdStatus::Ok);
        assert_eq!(t[0], 0.0);
        assert!((t[k - 1] - 1.0).abs() < 1e-15);

        let mut c = [0.0; 8];
        assert_eq!(fd_solution_coeffs(sol, k - 1, c.as_mut_ptr(), 8), FdStatus::Ok);
        let mut lap = [0.0; 8];
        assert_eq!(fd_laplace_coeffs(m, 1.0, lap.as_mut_ptr(), 8), FdStatus::Ok);
        for (a, b) in c.iter().zip(&lap) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let mut u = vec![0.0; 65];
        assert_eq!(fd_solution_field(sol, k - 1, u.as_mut_ptr(), 65), FdStatus::Ok);
        assert_eq!(u[0], 0.0);
        assert!(u[32] > 0.0);
        assert_eq!(fd_solution_coeffs(sol, k, c.as_mut_ptr(), 8), FdStatus::InvalidArgument);
        fd_solution_free(sol);
        fd_model_free(m);
    }
}

#[test]
fn diverging_solve_reports_non_contraction() {
    let cfg = "[problem]\nL = pi\nM = 64\nN = 8\nalphas = 0.8, 0.4\nq = -60\na = sin(x)\nT = 1\nK = 32\n\
               [solver]\nmax_halvings = 0\n";
    let (s, m) = model(cfg);
    assert_eq!(s, FdStatus::Ok);
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(fd_solve(m, &mut sol), FdStatus::NonContraction);
        assert!(sol.is_null());
        fd_model_free(m);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/fracdiff.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["fd_ml_eval", "fd_model_from_str", "fd_solve", "fd_solution_free", "FD_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; header content checked only");
        return;
    };
    assert!(cc.status.success());
    let include = dir.join("include");
    let syntax = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(dir.join("tests/c/smoke.c"))
        .status()
        .unwrap();
    assert!(syntax.success());
    // link against the static library when it sits next to this test binary
    let profile = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile.join("libfracdiff_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; link step skipped", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let link = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "smoke exited with {:?}", run.status.code());
    let c0: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!(c0 > 0.0 && c0 < 1.3);
}
