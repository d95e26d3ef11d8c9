//! C interface to the physio advisor.
//!
//! Every function returns a [`PhysioStatus`]. On failure a description is
//! available from [`physio_last_error`] on the same thread until the next
//! call. Strings handed out by the library must be released with
//! [`physio_string_free`]; engines with [`physio_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use physio_core::api::QueryResponse;
use physio_core::kb_store::{KnowledgeBase, ResponseCache};
use physio_core::llm_gateway::{CompletionBackend, LlmGateway, MockBackend, RemoteBackend};
use physio_core::pipeline::{Advisor, PipelineConfig, PipelineError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhysioStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Knowledge base, mock script or cache file could not be loaded.
    LoadError = 3,
    /// Empty or over-long query.
    InvalidInput = 4,
    /// The language model failed while writing the answer.
    GenerationFailed = 5,
    Internal = 6,
    Panic = 7,
}

/// Record counts of a loaded knowledge base.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhysioKbCounts {
    pub conditions: usize,
    pub webpages: usize,
    pub exercises: usize,
    pub medications: usize,
}

/// Opaque engine handle. Safe to share between threads.
pub struct PhysioEngine {
    advisor: Advisor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

struct Failure(PhysioStatus, String);

impl Failure {
    fn new(status: PhysioStatus, message: impl ToString) -> Self {
        Self(status, message.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PhysioStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PhysioStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PhysioStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn required_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    optional_str(p, what)?.ok_or_else(|| Failure::new(PhysioStatus::NullArgument, format!("{what} is null")))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn optional_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::new(PhysioStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn load_error(e: impl ToString) -> Failure {
    Failure::new(PhysioStatus::LoadError, e)
}

fn build_engine(
    data_dir: &Path,
    cache_file: Option<&str>,
    seed: u64,
    backend: Arc<dyn CompletionBackend>,
) -> Result<Box<PhysioEngine>, Failure> {
    let mut kb = KnowledgeBase::load_dir(data_dir).map_err(load_error)?;
    if let Some(path) = cache_file {
        kb = kb.with_cache(ResponseCache::open(path).map_err(load_error)?);
    }
    let config = PipelineConfig {
        rng_seed: Some(seed),
        ..PipelineConfig::default()
    };
    let advisor = Advisor::new(Arc::new(kb), LlmGateway::new(backend), config)
        .map_err(|e| Failure::new(PhysioStatus::Internal, e))?;
    Ok(Box::new(PhysioEngine { advisor }))
}

/// Opens an engine over the knowledge base in `data_dir` answered by the
/// scripted mock backend. `mock_script` defaults to
/// `<data_dir>/mock_script.jsonl`; a null `cache_file` keeps the response
/// cache in memory. `seed` drives exercise sampling.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings and `out`
/// must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn physio_engine_open_mock(
    data_dir: *const c_char,
    mock_script: *const c_char,
    cache_file: *const c_char,
    seed: u64,
    out: *mut *mut PhysioEngine,
) -> PhysioStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(PhysioStatus::NullArgument, "out is null"));
        }
        let dir = PathBuf::from(required_str(data_dir, "data_dir")?);
        let script = match optional_str(mock_script, "mock_script")? {
            Some(p) => PathBuf::from(p),
            None => dir.join("mock_script.jsonl"),
        };
        let backend = MockBackend::from_file(&script).map_err(load_error)?;
        let engine = build_engine(&dir, optional_str(cache_file, "cache_file")?, seed, Arc::new(backend))?;
        *out = Box::into_raw(engine);
        Ok(())
    })
}

/// Opens an engine backed by an OpenAI-compatible chat-completion endpoint.
/// The bearer token is read from `PHYSIO_LLM_API_KEY`.
///
/// # Safety
/// As for [`physio_engine_open_mock`].
#[no_mangle]
pub unsafe extern "C" fn physio_engine_open_remote(
    data_dir: *const c_char,
    url: *const c_char,
    model: *const c_char,
    timeout_ms: u64,
    cache_file: *const c_char,
    seed: u64,
    out: *mut *mut PhysioEngine,
) -> PhysioStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(PhysioStatus::NullArgument, "out is null"));
        }
        let dir = PathBuf::from(required_str(data_dir, "data_dir")?);
        let backend = RemoteBackend::from_env(
            required_str(url, "url")?,
            required_str(model, "model")?,
            Duration::from_millis(timeout_ms),
        );
        let engine = build_engine(&dir, optional_str(cache_file, "cache_file")?, seed, Arc::new(backend))?;
        *out = Box::into_raw(engine);
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or a handle from an open function not yet freed.
#[no_mangle]
pub unsafe extern "C" fn physio_engine_free(engine: *mut PhysioEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Answers `query` and stores the response JSON (the same document the
/// HTTP API returns) in `*out_json`.
///
/// # Safety
/// `engine` must be a live handle, `query` a valid NUL-terminated string
/// and `out_json` writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn physio_engine_query(
    engine: *const PhysioEngine,
    query: *const c_char,
    out_json: *mut *mut c_char,
) -> PhysioStatus {
    guard(|| {
        if engine.is_null() || out_json.is_null() {
            return Err(Failure::new(PhysioStatus::NullArgument, "engine or out_json is null"));
        }
        let query = required_str(query, "query")?;
        let (answer, trace) = (*engine).advisor.handle(query).map_err(|e| {
            let status = match e {
                PipelineError::InvalidInput(_) => PhysioStatus::InvalidInput,
                PipelineError::Generation(_) | PipelineError::Attribution(_) => PhysioStatus::GenerationFailed,
                _ => PhysioStatus::Internal,
            };
            Failure::new(status, e)
        })?;
        let json = serde_json::to_string(&QueryResponse::from_answer(&answer, trace.cache_hit))
            .map_err(|e| Failure::new(PhysioStatus::Internal, e))?;
        let json = CString::new(json).map_err(|e| Failure::new(PhysioStatus::Internal, e))?;
        *out_json = json.into_raw();
        Ok(())
    })
}

/// Writes the knowledge-base record counts to `*out`.
///
/// # Safety
/// `engine` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn physio_engine_counts(engine: *const PhysioEngine, out: *mut PhysioKbCounts) -> PhysioStatus {
    guard(|| {
        if engine.is_null() || out.is_null() {
            return Err(Failure::new(PhysioStatus::NullArgument, "engine or out is null"));
        }
        let c = (*engine).advisor.kb.counts();
        *out = PhysioKbCounts {
            conditions: c.conditions,
            webpages: c.webpages,
            exercises: c.exercises,
            medications: c.medications,
        };
        Ok(())
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn physio_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn physio_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn physio_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
