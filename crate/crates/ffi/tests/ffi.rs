use oscillab_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let s = unsafe { osc_last_error(buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(s, OscStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn grid(values: &[f64], dim: usize, depth: u32) -> *mut OscGrid {
    let mut g = ptr::null_mut();
    let s = unsafe { osc_grid_new(dim, depth, values.as_ptr(), values.len(), &mut g) };
    assert_eq!(s, OscStatus::Ok, "{}", last_error());
    g
}

#[test]
fn jn_norm_and_bmo_through_handles() {
    let g = grid(&[0.0, 0.0, 0.0, 4.0], 1, 2);
    let mut jn = 0.0;
    let mut bmo = 0.0;
    unsafe {
        assert_eq!(osc_jn_norm(g, ptr::null(), 2.0, &mut jn), OscStatus::Ok);
        assert_eq!(osc_bmo_norm(g, &mut bmo), OscStatus::Ok);
        let mut fam = ptr::null_mut();
        assert_eq!(osc_family_polynomial(1, 2, 0, &mut fam), OscStatus::Ok);
        let mut jn0 = 0.0;
        assert_eq!(osc_jn_norm(g, fam, 2.0, &mut jn0), OscStatus::Ok);
        assert_eq!(jn0, jn);
        osc_family_free(fam);
        let mut m = [0.0; 4];
        assert_eq!(osc_dyadic_maximal(g, m.as_mut_ptr(), 4), OscStatus::Ok);
        assert_eq!(m[3], 4.0);
        assert_eq!(osc_dyadic_maximal(g, m.as_mut_ptr(), 2), OscStatus::BufferTooSmall);
        let (mut pass, mut ratio) = (0, 0.0);
        assert_eq!(osc_levelset_jn(g, 4.0, 0.5, 1.0, &mut pass, &mut ratio), OscStatus::Ok);
        assert_eq!(pass, 1);
        osc_grid_free(g);
    }
    assert_eq!(jn, 1.5);
    assert_eq!(bmo, 2.0);
}

#[test]
fn errors_map_to_status_codes() {
    let v = [1.0, 2.0, 3.0];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(osc_grid_new(1, 2, v.as_ptr(), 3, &mut g), OscStatus::InvalidArgument);
        assert!(last_error().contains("expected 4"));
        assert_eq!(osc_grid_new(1, 2, ptr::null(), 4, &mut g), OscStatus::NullPointer);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(osc_grid_from_json(bad.as_ptr(), &mut g), OscStatus::ParseError);
        let mut x = 0.0;
        assert_eq!(
            osc_jn_norm(ptr::null(), ptr::null(), 2.0, &mut x),
            OscStatus::NullPointer
        );
        osc_grid_free(ptr::null_mut());
    }
    let g = grid(&[1.0, 1.0, 1.0, 1.0], 1, 2);
    let (mut e, mut p) = (1.0, 0.0);
    unsafe {
        assert_eq!(osc_gr_epsilon(g, &mut e, &mut p), OscStatus::Ok);
        osc_grid_free(g);
    }
    assert_eq!(e, 0.0);
    assert!(p.is_infinite());
    assert_eq!(last_error(), "");
}

#[test]
fn metric_space_handles() {
    let dist = [0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0];
    let w = [1.0, 1.0, 1.0];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            osc_space_new(dist.as_ptr(), w.as_ptr(), 3, &mut s),
            OscStatus::Ok,
            "{}",
            last_error()
        );
        let (mut c, mut d) = (0.0, 0.0);
        assert_eq!(osc_space_doubling(s, &mut c, &mut d), OscStatus::Ok);
        assert!(c >= 1.0 && d > 0.0);
        let f = [0.0, 0.0, 3.0];
        let (mut v, mut exact) = (0.0, 0);
        assert_eq!(
            osc_metric_jn_norm(s, f.as_ptr(), 3, 2.0, 1.0, 1.0, 1, 5.0, &mut v, &mut exact),
            OscStatus::Ok
        );
        assert_eq!(exact, 1);
        assert!(v > 0.0);
        assert_eq!(
            osc_metric_jn_norm(s, f.as_ptr(), 2, 2.0, 1.0, 1.0, 1, 5.0, &mut v, &mut exact),
            OscStatus::InvalidArgument
        );
        osc_space_free(s);
        let bad = [0.0, 1.0, 1.0, 0.5];
        assert_eq!(
            osc_space_new(bad.as_ptr(), w.as_ptr(), 2, &mut s),
            OscStatus::InvalidArgument
        );
    }
}

#[test]
fn run_reports_json_and_sizes_the_buffer() {
    let dir = std::env::temp_dir().join(format!("oscillab-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let input = dir.join("g.json");
    std::fs::write(&input, r#"{"dim":1,"depth":2,"values":[0,0,0,4]}"#).unwrap();
    let args: Vec<CString> = ["jn-norm", "--p", "2", "--input", input.to_str().unwrap()]
        .iter()
        .map(|a| CString::new(*a).unwrap())
        .collect();
    let argv: Vec<*const c_char> = args.iter().map(|a| a.as_ptr()).collect();
    let mut needed = 0usize;
    let mut pass = 0;
    let s = unsafe { osc_run(argv.as_ptr(), argv.len(), ptr::null_mut(), 0, &mut needed, &mut pass) };
    assert_eq!(s, OscStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    let s = unsafe {
        osc_run(
            argv.as_ptr(),
            argv.len(),
            buf.as_mut_ptr(),
            buf.len(),
            &mut needed,
            &mut pass,
        )
    };
    assert_eq!(s, OscStatus::Ok, "{}", last_error());
    assert_eq!(pass, 1);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["jn_norm"], 1.5);
    let bad = [CString::new("no-such-command").unwrap()];
    let argv: Vec<*const c_char> = bad.iter().map(|a| a.as_ptr()).collect();
    let s = unsafe {
        osc_run(
            argv.as_ptr(),
            1,
            buf.as_mut_ptr(),
            buf.len(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(s, OscStatus::InvalidArgument);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(osc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke test against the generated header and the static
/// library. Needs a C compiler on PATH.
#[test]
fn c_smoke_test() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liboscillab_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out = std::env::temp_dir().join(format!("oscillab-smoke-{}", std::process::id()));
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("cc");
    assert!(status.success());
    let run = std::process::Command::new(&out).output().unwrap();
    std::fs::remove_file(&out).ok();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
