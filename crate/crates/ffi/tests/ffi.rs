use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use rbicgstab_ffi::*;

/// Tridiagonal convection-diffusion-like matrix in CSR form.
fn tridiagonal(n: usize) -> *mut RbMatrix {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for i in 0..n {
        for (j, v) in [(i.wrapping_sub(1), -1.3), (i, 4.0), (i + 1, -0.7)] {
            if j < n {
                rows.push(i);
                cols.push(j);
                vals.push(v);
            }
        }
    }
    let mut m = ptr::null_mut();
    let st = unsafe {
        rb_matrix_from_triplets(
            n,
            n,
            vals.len(),
            rows.as_ptr(),
            cols.as_ptr(),
            vals.as_ptr(),
            &mut m,
        )
    };
    assert_eq!(st, RbStatus::Ok);
    m
}

fn residual(m: *const RbMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    assert_eq!(
        unsafe { rb_matrix_matvec(m, x.as_ptr(), ax.as_mut_ptr()) },
        RbStatus::Ok
    );
    let r: f64 = b
        .iter()
        .zip(&ax)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn last_error() -> String {
    let p = rb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn csr_construction_and_queries() {
    let row_ptr = [0usize, 2, 3];
    let col_idx = [0usize, 1, 1];
    let values = [2.0, 1.0, 3.0];
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            rb_matrix_from_csr(
                2,
                2,
                row_ptr.as_ptr(),
                col_idx.as_ptr(),
                values.as_ptr(),
                &mut m
            ),
            RbStatus::Ok
        );
        assert_eq!(
            (rb_matrix_nrows(m), rb_matrix_ncols(m), rb_matrix_nnz(m)),
            (2, 2, 3)
        );
        let mut y = [0.0; 2];
        rb_matrix_matvec(m, [1.0, 1.0].as_ptr(), y.as_mut_ptr());
        assert_eq!(y, [3.0, 3.0]);
        rb_matrix_free(m);
        assert_eq!(rb_matrix_nrows(ptr::null()), 0);
    }
}

#[test]
fn every_solver_converges_with_and_without_preconditioning() {
    let n = 60;
    let m = tridiagonal(n);
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() + 1.0).collect();
    let bt = vec![1.0; n];
    let mut cfg = rb_solver_config_default();
    cfg.tol = 1e-10;
    cfg.k = 4;
    cfg.s = 8;
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(rb_ilutp(m, 1e-2, 0.1, &mut f), RbStatus::Ok);
        for factors in [ptr::null(), f as *const RbFactors] {
            let mut x = vec![0.0; n];
            let mut h = ptr::null_mut();
            assert_eq!(
                rb_bicgstab(m, factors, b.as_ptr(), x.as_mut_ptr(), &cfg, &mut h),
                RbStatus::Ok
            );
            assert!(residual(m, &b, &x) < 1e-8);
            assert!(rb_history_iterations(h) > 0);
            let mut status = RbSolveStatus::Stagnated;
            assert_eq!(rb_history_status(h, &mut status), RbStatus::Ok);
            assert_eq!(status, RbSolveStatus::Converged);
            rb_history_free(h);

            let (mut x, mut xt) = (vec![0.0; n], vec![0.0; n]);
            assert_eq!(
                rb_bicg(
                    m,
                    factors,
                    b.as_ptr(),
                    bt.as_ptr(),
                    x.as_mut_ptr(),
                    xt.as_mut_ptr(),
                    &cfg,
                    ptr::null_mut()
                ),
                RbStatus::Ok
            );
            assert!(residual(m, &b, &x) < 1e-8);

            let (mut x, mut xt) = (vec![0.0; n], vec![0.0; n]);
            let mut space = ptr::null_mut();
            let st = rb_rbicg(
                m,
                factors,
                ptr::null(),
                b.as_ptr(),
                bt.as_ptr(),
                x.as_mut_ptr(),
                xt.as_mut_ptr(),
                &cfg,
                &mut space,
                ptr::null_mut(),
            );
            assert_eq!(st, RbStatus::Ok);
            assert!(residual(m, &b, &x) < 1e-8);
            assert!(rb_recycle_dim(space) > 0);

            let mut x = vec![0.0; n];
            let mut h = ptr::null_mut();
            assert_eq!(
                rb_rbicgstab(m, factors, space, b.as_ptr(), x.as_mut_ptr(), &cfg, &mut h),
                RbStatus::Ok
            );
            assert!(residual(m, &b, &x) < 1e-8);
            let count = rb_history_residuals(h, ptr::null_mut(), 0);
            let mut res = vec![0.0; count];
            assert_eq!(rb_history_residuals(h, res.as_mut_ptr(), count), count);
            assert!(res[count - 1] <= 1e-10);
            rb_history_free(h);
            rb_recycle_free(space);
        }
        rb_factors_free(f);
        rb_matrix_free(m);
    }
}

#[test]
fn not_converged_is_reported_and_solution_written() {
    let n = 40;
    let m = tridiagonal(n);
    let b = vec![1.0; n];
    let mut x = vec![0.0; n];
    let mut cfg = rb_solver_config_default();
    cfg.max_itn = 1;
    cfg.tol = 1e-14;
    let st = unsafe {
        rb_bicgstab(
            m,
            ptr::null(),
            b.as_ptr(),
            x.as_mut_ptr(),
            &cfg,
            ptr::null_mut(),
        )
    };
    assert_eq!(st, RbStatus::NotConverged);
    assert!(x.iter().any(|&v| v != 0.0));
    unsafe { rb_matrix_free(m) };
}

#[test]
fn errors_set_codes_and_messages() {
    let mut m = ptr::null_mut();
    unsafe {
        let rows = [5usize];
        let cols = [0usize];
        let vals = [1.0];
        let st =
            rb_matrix_from_triplets(2, 2, 1, rows.as_ptr(), cols.as_ptr(), vals.as_ptr(), &mut m);
        assert_eq!(st, RbStatus::InvalidArgument);
        assert!(last_error().contains("outside"));
        assert!(m.is_null());

        let mut x = [0.0; 2];
        let st = rb_bicgstab(
            ptr::null(),
            ptr::null(),
            [1.0, 1.0].as_ptr(),
            x.as_mut_ptr(),
            ptr::null(),
            ptr::null_mut(),
        );
        assert_eq!(st, RbStatus::NullPointer);
        assert!(last_error().contains("matrix"));

        let missing = CString::new("/nonexistent/a.mtx").unwrap();
        assert_eq!(rb_matrix_read(missing.as_ptr(), &mut m), RbStatus::Io);

        let a = tridiagonal(4);
        let mut cfg = rb_solver_config_default();
        cfg.tol = -1.0;
        let st = rb_bicgstab(
            a,
            ptr::null(),
            [1.0; 4].as_ptr(),
            [0.0; 4].as_mut_ptr(),
            &cfg,
            ptr::null_mut(),
        );
        assert_eq!(st, RbStatus::InvalidArgument);
        rb_matrix_free(a);
    }
}

#[test]
fn files_round_trip_through_the_interface() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = CString::new(dir.path().join("a.mtx").to_str().unwrap()).unwrap();
    let rbr = CString::new(dir.path().join("u.rbr").to_str().unwrap()).unwrap();
    let csv = CString::new(dir.path().join("h.csv").to_str().unwrap()).unwrap();
    let n = 30;
    let m = tridiagonal(n);
    let b = vec![1.0; n];
    let mut cfg = rb_solver_config_default();
    cfg.k = 3;
    cfg.s = 6;
    unsafe {
        assert_eq!(rb_matrix_write(m, mtx.as_ptr()), RbStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(rb_matrix_read(mtx.as_ptr(), &mut back), RbStatus::Ok);
        assert_eq!(rb_matrix_nnz(back), rb_matrix_nnz(m));

        let (mut x, mut xt) = (vec![0.0; n], vec![0.0; n]);
        let mut space = ptr::null_mut();
        let mut h = ptr::null_mut();
        rb_rbicg(
            m,
            ptr::null(),
            ptr::null(),
            b.as_ptr(),
            b.as_ptr(),
            x.as_mut_ptr(),
            xt.as_mut_ptr(),
            &cfg,
            &mut space,
            &mut h,
        );
        assert_eq!(rb_recycle_save(space, rbr.as_ptr()), RbStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(
            rb_recycle_load(rbr.as_ptr(), back, ptr::null(), &mut loaded),
            RbStatus::Ok
        );
        assert_eq!(rb_recycle_dim(loaded), rb_recycle_dim(space));
        let mut refreshed = ptr::null_mut();
        assert_eq!(
            rb_recycle_refresh(loaded, back, ptr::null(), &mut refreshed),
            RbStatus::Ok
        );

        let label = CString::new("rbicg").unwrap();
        assert_eq!(
            rb_history_write(h, label.as_ptr(), csv.as_ptr()),
            RbStatus::Ok
        );
        let text = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1,rbicg,0,"));

        for s in [space, loaded, refreshed] {
            rb_recycle_free(s);
        }
        rb_history_free(h);
        rb_matrix_free(back);
        rb_matrix_free(m);
    }
}

#[test]
fn header_compiles_as_c_and_cxx() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rbicgstab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "rb_bicgstab",
        "rb_rbicgstab",
        "rb_rbicg",
        "rb_recycle_load",
        "rb_last_error",
        "RB_STATUS_NOT_CONVERGED",
    ] {
        assert!(text.contains(name), "{name} missing from the header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
        else {
            eprintln!("{compiler} not available, skipping");
            continue;
        };
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
