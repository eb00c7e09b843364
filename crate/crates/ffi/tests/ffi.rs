use std::ffi::{c_char, CStr, CString};
use std::ptr;

use slq_ffi::*;

fn take(s: *mut c_char) -> Option<String> {
    if s.is_null() {
        return None;
    }
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { slq_string_free(s) };
    Some(out)
}

fn parsed(text: &str) -> *mut SlqFormula {
    let c = CString::new(text).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { slq_formula_parse(c.as_ptr(), &mut f) }, SlqStatus::Ok);
    assert!(!f.is_null());
    f
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(slq_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn valid_and_invalid() {
    let f = parsed("emp -> (alloc(x) /\\ size = 1 -* not size >= 2)");
    let mut v = SlqVerdict::Invalid;
    let mut cm = ptr::null_mut();
    assert_eq!(unsafe { slq_decide_valid(f, &mut v, &mut cm) }, SlqStatus::Ok);
    assert_eq!(v, SlqVerdict::Valid);
    assert!(take(cm).is_none());
    unsafe { slq_formula_free(f) };

    let f = parsed("size >= 1 -> alloc(x)");
    assert_eq!(unsafe { slq_decide_valid(f, &mut v, &mut cm) }, SlqStatus::Ok);
    assert_eq!(v, SlqVerdict::Invalid);
    assert!(take(cm).unwrap().starts_with("store: x->"));
    // The countermodel pointer may be null.
    assert_eq!(unsafe { slq_decide_valid(f, &mut v, ptr::null_mut()) }, SlqStatus::Ok);
    unsafe { slq_formula_free(f) };
}

#[test]
fn sat_print_normalize() {
    let f = parsed("alloc(x) * alloc(x)");
    let mut v = SlqVerdict::Sat;
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { slq_decide_sat(f, &mut v, &mut w) }, SlqStatus::Ok);
    assert_eq!(v, SlqVerdict::Unsat);
    assert!(take(w).is_none());
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { slq_formula_print(f, &mut s) }, SlqStatus::Ok);
    assert_eq!(take(s).unwrap(), "alloc(x) * alloc(x)");
    unsafe { slq_formula_free(f) };

    let f = parsed("emp");
    assert_eq!(unsafe { slq_normalize(f, &mut s) }, SlqStatus::Ok);
    assert_eq!(take(s).unwrap(), "not size >= 1");
    unsafe { slq_formula_free(f) };
}

#[test]
fn errors() {
    let bad = CString::new("x |->").unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { slq_formula_parse(bad.as_ptr(), &mut f) }, SlqStatus::ParseError);
    assert!(f.is_null());
    assert!(last_error().contains("expected a variable"));

    assert_eq!(unsafe { slq_formula_parse(ptr::null(), &mut f) }, SlqStatus::NullArgument);
    let mut v = SlqVerdict::Sat;
    assert_eq!(
        unsafe { slq_decide_sat(ptr::null(), &mut v, ptr::null_mut()) },
        SlqStatus::NullArgument
    );
    let not_utf8 = [0xffu8, 0];
    assert_eq!(
        unsafe { slq_formula_parse(not_utf8.as_ptr() as *const c_char, &mut f) },
        SlqStatus::InvalidUtf8
    );
    unsafe {
        slq_formula_free(ptr::null_mut());
        slq_string_free(ptr::null_mut());
    }
}

#[test]
fn proofs() {
    let good = CString::new(slq::hilbert::builtin_source("wand-not-two").unwrap()).unwrap();
    let (mut ok, mut step, mut reason) = (0, 0usize, ptr::null_mut());
    assert_eq!(unsafe { slq_check_proof(good.as_ptr(), &mut ok, &mut step, &mut reason) }, SlqStatus::Ok);
    assert_eq!((ok, step), (1, 0));
    assert!(take(reason).unwrap().starts_with("ok"));

    let broken = CString::new("1. alloc(x) ; axiom PtoAlloc[x=x,y=y]\n").unwrap();
    assert_eq!(
        unsafe { slq_check_proof(broken.as_ptr(), &mut ok, &mut step, ptr::null_mut()) },
        SlqStatus::Ok
    );
    assert_eq!((ok, step), (0, 1));

    let garbage = CString::new("this is not a proof").unwrap();
    assert_eq!(
        unsafe { slq_check_proof(garbage.as_ptr(), &mut ok, &mut step, ptr::null_mut()) },
        SlqStatus::ParseError
    );
}
