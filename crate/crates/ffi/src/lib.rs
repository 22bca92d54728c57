//! C ABI over the phenoprio engine.
//!
//! Every fallible call returns a `PpStatus` and writes results through out
//! pointers. On failure `pp_last_error_message` describes the most recent
//! error on the calling thread. Handles are opaque and must be released
//! with their `_free` function; strings returned through `char **` must be
//! released with `pp_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use phenoprio::annotations::AnnotationKB;
use phenoprio::evaluation::topk_prf;
use phenoprio::ontology::{compute_stats, lin_similarity, set_similarity, Ontology, OntologyStats, TermId};
use phenoprio::ranking::RankModel;
use phenoprio::standardization::{standardize_one, HashedNgramEmbedder, ThresholdSelector, VectorIndex};
use phenoprio::{Error, ErrorClass};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Data = 4,
    Backend = 5,
    Panic = 6,
}

pub struct PpOntology {
    inner: Ontology,
}

pub struct PpStats {
    inner: OntologyStats,
}

pub struct PpIndex {
    provider: HashedNgramEmbedder,
    inner: VectorIndex,
}

pub struct PpModel {
    inner: RankModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Utf8(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> PpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PpStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PpStatus::NullPointer
        }
        Ok(Err(Failure::Utf8(what))) => {
            set_error(format!("invalid UTF-8 in {what}"));
            PpStatus::InvalidUtf8
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            match e.class() {
                ErrorClass::Config => PpStatus::Config,
                ErrorClass::Data => PpStatus::Data,
                ErrorClass::Backend => PpStatus::Backend,
            }
        }
        Err(_) => {
            set_error("internal panic".into());
            PpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(what))
}

unsafe fn term_arg(p: *const c_char, what: &'static str) -> FfiResult<TermId> {
    Ok(TermId::parse(str_arg(p, what)?)?)
}

unsafe fn term_list(p: *const *const c_char, n: usize, what: &'static str) -> FfiResult<Vec<TermId>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    std::slice::from_raw_parts(p, n).iter().map(|&s| term_arg(s, what)).collect()
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn pp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an OBO or JSON ontology file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_ontology_load(path: *const c_char, out: *mut *mut PpOntology) -> PpStatus {
    guard(|| {
        let o = Ontology::load(Path::new(str_arg(path, "path")?))?;
        put(out, Box::into_raw(Box::new(PpOntology { inner: o })), "out")
    })
}

/// Parses OBO text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_ontology_parse_obo(text: *const c_char, out: *mut *mut PpOntology) -> PpStatus {
    guard(|| {
        let o = Ontology::parse_obo(str_arg(text, "text")?)?;
        put(out, Box::into_raw(Box::new(PpOntology { inner: o })), "out")
    })
}

/// # Safety
/// `o` must be NULL or a handle from `pp_ontology_load`/`pp_ontology_parse_obo`.
#[no_mangle]
pub unsafe extern "C" fn pp_ontology_free(o: *mut PpOntology) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Number of non-obsolete terms.
///
/// # Safety
/// `o` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_ontology_live_count(o: *const PpOntology, out: *mut usize) -> PpStatus {
    guard(|| put(out, handle(o, "ontology")?.inner.live_count(), "out"))
}

/// Primary name of a term; free the result with `pp_string_free`.
///
/// # Safety
/// `o` must be a valid handle, `id` a NUL-terminated string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_ontology_term_name(o: *const PpOntology, id: *const c_char, out: *mut *mut c_char) -> PpStatus {
    guard(|| {
        let o = handle(o, "ontology")?;
        let t = o.inner.term(&term_arg(id, "id")?)?;
        put(out, owned_string(&t.name), "out")
    })
}

/// Information content from disease (`term\tdisease\tsource`) and optional
/// gene (`term\tgene`) annotation text.
///
/// # Safety
/// `o` must be a valid handle, `diseases` a NUL-terminated string, `genes`
/// NULL or a NUL-terminated string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_new(
    o: *const PpOntology,
    diseases: *const c_char,
    genes: *const c_char,
    out: *mut *mut PpStats,
) -> PpStatus {
    guard(|| {
        let o = handle(o, "ontology")?;
        let genes = if genes.is_null() { "" } else { str_arg(genes, "genes")? };
        let kb = AnnotationKB::load(str_arg(diseases, "diseases")?, genes, &o.inner)?;
        let s = compute_stats(&o.inner, &kb)?;
        put(out, Box::into_raw(Box::new(PpStats { inner: s })), "out")
    })
}

/// # Safety
/// `s` must be NULL or a handle from `pp_stats_new`.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_free(s: *mut PpStats) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a valid handle, `id` a NUL-terminated string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_stats_ic(s: *const PpStats, id: *const c_char, out: *mut f64) -> PpStatus {
    guard(|| put(out, handle(s, "stats")?.inner.ic(&term_arg(id, "id")?)?, "out"))
}

/// Lin similarity of two terms.
///
/// # Safety
/// Handles must be valid and built from the same ontology; `a`, `b` must be
/// NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_lin_similarity(
    o: *const PpOntology,
    s: *const PpStats,
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> PpStatus {
    guard(|| {
        let v = lin_similarity(
            &handle(o, "ontology")?.inner,
            &handle(s, "stats")?.inner,
            &term_arg(a, "a")?,
            &term_arg(b, "b")?,
        )?;
        put(out, v, "out")
    })
}

/// Best-match-average Lin similarity of two term sets.
///
/// # Safety
/// Handles must be valid; `a` and `b` must point to `na` and `nb`
/// NUL-terminated strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_set_similarity(
    o: *const PpOntology,
    s: *const PpStats,
    a: *const *const c_char,
    na: usize,
    b: *const *const c_char,
    nb: usize,
    out: *mut f64,
) -> PpStatus {
    guard(|| {
        let v = set_similarity(
            &handle(o, "ontology")?.inner,
            &handle(s, "stats")?.inner,
            &term_list(a, na, "a")?.into_iter().collect(),
            &term_list(b, nb, "b")?.into_iter().collect(),
        )?;
        put(out, v, "out")
    })
}

/// Embedding index over every live term name and synonym.
///
/// # Safety
/// `o` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_index_build(o: *const PpOntology, out: *mut *mut PpIndex) -> PpStatus {
    guard(|| {
        let provider = HashedNgramEmbedder::default();
        let inner = VectorIndex::build(&handle(o, "ontology")?.inner, &provider)?;
        put(out, Box::into_raw(Box::new(PpIndex { provider, inner })), "out")
    })
}

/// # Safety
/// `i` must be NULL or a handle from `pp_index_build`.
#[no_mangle]
pub unsafe extern "C" fn pp_index_free(i: *mut PpIndex) {
    if !i.is_null() {
        drop(Box::from_raw(i));
    }
}

/// Maps a mention to a term. `*term_out` receives the term id (free with
/// `pp_string_free`) or NULL when the best cosine is below `threshold`;
/// `*score_out` receives that cosine.
///
/// # Safety
/// Handles must be valid and built from the same ontology; `mention` must
/// be a NUL-terminated string; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pp_standardize(
    i: *const PpIndex,
    o: *const PpOntology,
    mention: *const c_char,
    threshold: f64,
    term_out: *mut *mut c_char,
    score_out: *mut f64,
) -> PpStatus {
    guard(|| {
        let i = handle(i, "index")?;
        let selector = ThresholdSelector { threshold };
        let (_, sel) = standardize_one(
            str_arg(mention, "mention")?,
            &handle(o, "ontology")?.inner,
            &i.inner,
            &i.provider,
            &selector,
            1,
        )?;
        let term = sel.resolved.map_or(ptr::null_mut(), |t| owned_string(t.as_str()));
        if score_out.is_null() {
            pp_string_free(term);
            return Err(Failure::Null("score_out"));
        }
        score_out.write(sel.decision_score);
        put(term_out, term, "term_out").inspect_err(|_| pp_string_free(term))
    })
}

/// Loads a model written by the `train` subcommand.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_model_load(path: *const c_char, out: *mut *mut PpModel) -> PpStatus {
    guard(|| {
        let text = phenoprio::io::read_text(Path::new(str_arg(path, "path")?))?;
        put(out, Box::into_raw(Box::new(PpModel { inner: RankModel::from_json(&text)? })), "out")
    })
}

/// # Safety
/// `m` must be NULL or a handle from `pp_model_load`.
#[no_mangle]
pub unsafe extern "C" fn pp_model_free(m: *mut PpModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Length of the feature vector the model expects.
///
/// # Safety
/// `m` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_model_feature_count(m: *const PpModel, out: *mut usize) -> PpStatus {
    guard(|| put(out, handle(m, "model")?.inner.schema.len(), "out"))
}

/// Scores one raw feature vector.
///
/// # Safety
/// `m` must be a valid handle, `features` must point to `n` doubles and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_model_score(m: *const PpModel, features: *const f64, n: usize, out: *mut f64) -> PpStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if features.is_null() && n > 0 {
            return Err(Failure::Null("features"));
        }
        let x: &[f64] = if n == 0 { &[] } else { std::slice::from_raw_parts(features, n) };
        put(out, m.inner.score(x)?, "out")
    })
}

/// Top-k precision, recall and F1 of a ranked list against gold terms.
///
/// # Safety
/// `ranked` and `gold` must point to `n_ranked` and `n_gold`
/// NUL-terminated strings; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pp_topk_prf(
    ranked: *const *const c_char,
    n_ranked: usize,
    gold: *const *const c_char,
    n_gold: usize,
    k: usize,
    precision: *mut f64,
    recall: *mut f64,
    f1: *mut f64,
) -> PpStatus {
    guard(|| {
        let ranked = term_list(ranked, n_ranked, "ranked")?;
        let gold = term_list(gold, n_gold, "gold")?.into_iter().collect();
        let r = topk_prf(&ranked, &gold, k);
        put(precision, r.precision, "precision")?;
        put(recall, r.recall, "recall")?;
        put(f1, r.f1, "f1")
    })
}
