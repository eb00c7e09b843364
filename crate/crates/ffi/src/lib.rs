//! C ABI for the `slq` decision procedure.
//!
//! Every function returns an [`SlqStatus`]. Results come back through out
//! pointers; strings returned this way are owned by the caller and must be
//! released with [`slq_string_free`]. After a non-`OK` status,
//! [`slq_last_error`] describes the failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slq::hilbert::{check_derivation, parse_derivation};
use slq::{decide_sat, decide_valid, normalize, parse, Formula, SatResult, ValidResult};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlqStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InternalError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlqVerdict {
    Valid = 0,
    Invalid = 1,
    Sat = 2,
    Unsat = 3,
}

/// Opaque parsed formula.
pub struct SlqFormula(Formula);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), (SlqStatus, String)>) -> SlqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside slq");
            SlqStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (SlqStatus, String)> {
    if p.is_null() {
        return Err((SlqStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (SlqStatus::InvalidUtf8, e.to_string()))
}

fn out_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn null_arg() -> (SlqStatus, String) {
    (SlqStatus::NullArgument, "null pointer argument".into())
}

fn internal(e: impl ToString) -> (SlqStatus, String) {
    (SlqStatus::InternalError, e.to_string())
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn slq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `text` into a new formula handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn slq_formula_parse(text: *const c_char, out: *mut *mut SlqFormula) -> SlqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg());
        }
        *out = ptr::null_mut();
        let f = parse(read_str(text)?).map_err(|e| (SlqStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(SlqFormula(f)));
        Ok(())
    })
}

/// Releases a formula handle. Null is ignored.
///
/// # Safety
/// `f` must be null or a handle from [`slq_formula_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slq_formula_free(f: *mut SlqFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Prints a formula in the concrete syntax accepted by the parser.
///
/// # Safety
/// `f` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn slq_formula_print(f: *const SlqFormula, out: *mut *mut c_char) -> SlqStatus {
    guard(|| {
        let (f, out) = (f.as_ref().ok_or_else(null_arg)?, out.as_mut().ok_or_else(null_arg)?);
        *out = out_string(f.0.to_string());
        Ok(())
    })
}

/// Decides validity. When invalid and `countermodel` is non-null, a
/// countermodel is written there in the form `store: x->0 ; heap: 0->1`;
/// otherwise `*countermodel` is set to null.
///
/// # Safety
/// `f` must be a live handle, `verdict` writable, `countermodel` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slq_decide_valid(
    f: *const SlqFormula,
    verdict: *mut SlqVerdict,
    countermodel: *mut *mut c_char,
) -> SlqStatus {
    guard(|| {
        let (f, verdict) = (f.as_ref().ok_or_else(null_arg)?, verdict.as_mut().ok_or_else(null_arg)?);
        let cm = countermodel.as_mut();
        let (v, m) = match decide_valid(&f.0).map_err(internal)? {
            ValidResult::Valid => (SlqVerdict::Valid, None),
            ValidResult::Invalid(m) => (SlqVerdict::Invalid, Some(m)),
        };
        *verdict = v;
        if let Some(cm) = cm {
            *cm = m.map_or(ptr::null_mut(), |m| out_string(m.to_string()));
        }
        Ok(())
    })
}

/// Decides satisfiability; the witness is reported like [`slq_decide_valid`]'s countermodel.
///
/// # Safety
/// `f` must be a live handle, `verdict` writable, `witness` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slq_decide_sat(
    f: *const SlqFormula,
    verdict: *mut SlqVerdict,
    witness: *mut *mut c_char,
) -> SlqStatus {
    guard(|| {
        let (f, verdict) = (f.as_ref().ok_or_else(null_arg)?, verdict.as_mut().ok_or_else(null_arg)?);
        let w = witness.as_mut();
        let (v, m) = match decide_sat(&f.0).map_err(internal)? {
            SatResult::Sat(m) => (SlqVerdict::Sat, Some(m)),
            SatResult::Unsat => (SlqVerdict::Unsat, None),
        };
        *verdict = v;
        if let Some(w) = w {
            *w = m.map_or(ptr::null_mut(), |m| out_string(m.to_string()));
        }
        Ok(())
    })
}

/// Writes an equivalent Boolean combination of core formulas to `*out`.
///
/// # Safety
/// `f` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn slq_normalize(f: *const SlqFormula, out: *mut *mut c_char) -> SlqStatus {
    guard(|| {
        let (f, out) = (f.as_ref().ok_or_else(null_arg)?, out.as_mut().ok_or_else(null_arg)?);
        *out = out_string(normalize(&f.0).to_formula().to_string());
        Ok(())
    })
}

/// Checks a derivation given as proof-file text. `*accepted` is set to 1 when
/// every step checks; otherwise 0, with the first failing step (1-based) in
/// `*failing_step`. When `reason` is non-null it receives the checker's
/// report. A malformed file yields `SLQ_STATUS_PARSE_ERROR`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `accepted` and `failing_step`
/// must be writable, `reason` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slq_check_proof(
    text: *const c_char,
    accepted: *mut i32,
    failing_step: *mut usize,
    reason: *mut *mut c_char,
) -> SlqStatus {
    guard(|| {
        if accepted.is_null() || failing_step.is_null() {
            return Err(null_arg());
        }
        let d = parse_derivation(read_str(text)?)
            .map_err(|e| (SlqStatus::ParseError, format!("line {}: {}", e.line, e.msg)))?;
        let r = check_derivation(&d);
        *accepted = i32::from(r.ok);
        *failing_step = r.failing_step.unwrap_or(0);
        if let Some(reason) = reason.as_mut() {
            *reason = out_string(r.to_string());
        }
        Ok(())
    })
}
