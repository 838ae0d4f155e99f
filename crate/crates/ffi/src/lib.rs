//! C ABI over `georeduce`.
//!
//! Every fallible function returns a [`GrStatus`]. On failure a message for
//! the calling thread is available from [`gr_last_error_message`]. Objects
//! are opaque handles created by `*_new`/`*_train`/`gr_reduce` and released
//! with the matching `*_free`. Strings returned by the library are released
//! with [`gr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use georeduce::clustering::{compare_labelings, Labeling};
use georeduce::genome::{
    alleles_to_id, assemble_genome, id_to_alleles, Alleles, GeneLibrary, ModelId, GENOME_LEN,
};
use georeduce::oilfield::{generate_gene_library, OilfieldConfig, OipSource, Oracle};
use georeduce::pipeline::{semi_supervised_reduce, ReductionConfig, ReductionReport};
use georeduce::regress::{train_gb, GbModel, GbParams, Predictor};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Io = 4,
    Config = 5,
    Parse = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(georeduce::Error),
}

impl From<georeduce::Error> for Failure {
    fn from(e: georeduce::Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GrStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return GrStatus::Ok,
        Ok(Err(Failure::Null(what))) => (GrStatus::NullPointer, format!("{what} is null")),
        Ok(Err(Failure::Invalid(m))) => (GrStatus::InvalidArgument, m),
        Ok(Err(Failure::Core(e))) => {
            let status = match e {
                georeduce::Error::Domain(_) => GrStatus::Domain,
                georeduce::Error::Config(_) => GrStatus::Config,
                georeduce::Error::Parse(_) => GrStatus::Parse,
                georeduce::Error::Io(_) => GrStatus::Io,
            };
            (status, e.to_string())
        }
        Err(panic) => {
            let m = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (GrStatus::Panic, format!("panic: {m}"))
        }
    };
    set_last_error(msg);
    status
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(
    p: *mut T,
    len: usize,
    what: &'static str,
) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// `Ok(None)` for a null pointer.
unsafe fn opt_str<'a>(p: *const c_char, what: &'static str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Invalid("string contains a nul byte".into()))
}

fn model_id(id: u32) -> Result<ModelId, Failure> {
    Ok(ModelId::new(id as usize)?)
}

/// Message describing the last failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Model id of an allele triple, each allele in `0..24`.
///
/// # Safety
/// `out_id` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gr_alleles_to_id(
    sw: u32,
    ntg: u32,
    phi: u32,
    out_id: *mut u32,
) -> GrStatus {
    guard(|| {
        let out = out_ref(out_id, "out_id")?;
        let a = Alleles::new(sw as usize, ntg as usize, phi as usize)?;
        *out = alleles_to_id(a).get() as u32;
        Ok(())
    })
}

/// Allele triple of a model id in `0..13824`.
///
/// # Safety
/// The three output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_id_to_alleles(
    id: u32,
    out_sw: *mut u32,
    out_ntg: *mut u32,
    out_phi: *mut u32,
) -> GrStatus {
    guard(|| {
        let (sw, ntg, phi) = (
            out_ref(out_sw, "out_sw")?,
            out_ref(out_ntg, "out_ntg")?,
            out_ref(out_phi, "out_phi")?,
        );
        let a = id_to_alleles(model_id(id)?);
        *sw = u32::from(a.sw);
        *ntg = u32::from(a.ntg);
        *phi = u32::from(a.phi);
        Ok(())
    })
}

/// Pair-counting Rand index of two labelings of length `n`. Negative ids
/// are noise.
///
/// # Safety
/// `a` and `b` must point to `n` readable values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_rand_index(
    a: *const i64,
    b: *const i64,
    n: usize,
    out: *mut f64,
) -> GrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let to_labeling =
            |ids: &[i64]| Labeling::from_keys(ids.iter().map(|&c| (c >= 0).then_some(c)));
        let la = to_labeling(in_slice(a, n, "a")?);
        let lb = to_labeling(in_slice(b, n, "b")?);
        *out = compare_labelings(&la, &lb)?;
        Ok(())
    })
}

/// A generated gene library with its OIP oracle.
pub struct GrOilfield {
    lib: GeneLibrary,
    oracle: Oracle,
}

impl GrOilfield {
    fn build(cfg: OilfieldConfig) -> Result<Box<Self>, Failure> {
        cfg.validate()?;
        let lib = generate_gene_library(&cfg);
        let oracle = Oracle::new(&lib, &cfg);
        Ok(Box::new(GrOilfield { lib, oracle }))
    }
}

/// Synthetic oilfield with default settings and the given seed.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gr_oilfield_new(seed: u64, out: *mut *mut GrOilfield) -> GrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(GrOilfield::build(OilfieldConfig::with_seed(seed))?);
        Ok(())
    })
}

/// Synthetic oilfield from a JSON object of oilfield settings.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_oilfield_from_config_json(
    json: *const c_char,
    out: *mut *mut GrOilfield,
) -> GrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let text = opt_str(json, "json")?.ok_or(Failure::Null("json"))?;
        let cfg: OilfieldConfig = serde_json::from_str(text)
            .map_err(|e| Failure::Core(georeduce::Error::Config(e.to_string())))?;
        *out = Box::into_raw(GrOilfield::build(cfg)?);
        Ok(())
    })
}

/// # Safety
/// `h` must come from `gr_oilfield_new`/`gr_oilfield_from_config_json` and
/// not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gr_oilfield_free(h: *mut GrOilfield) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Copies the 132-value genome of model `id` into `out`.
///
/// # Safety
/// `h` must be a live handle; `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn gr_oilfield_genome(
    h: *const GrOilfield,
    id: u32,
    out: *mut f64,
    len: usize,
) -> GrStatus {
    guard(|| {
        let field = in_ref(h, "handle")?;
        if len != GENOME_LEN {
            return Err(Failure::Invalid(format!(
                "genome buffer must hold {GENOME_LEN} values, got {len}"
            )));
        }
        let out = out_slice(out, len, "out")?;
        let g = assemble_genome(&field.lib, id_to_alleles(model_id(id)?));
        out.copy_from_slice(g.values());
        Ok(())
    })
}

/// True OIP of model `id`.
///
/// # Safety
/// `h` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_oilfield_oip(h: *const GrOilfield, id: u32, out: *mut f64) -> GrStatus {
    guard(|| {
        let field = in_ref(h, "handle")?;
        let out = out_ref(out, "out")?;
        *out = field.oracle.evaluate(model_id(id)?);
        Ok(())
    })
}

/// A fitted gradient boosted regressor.
pub struct GrGbModel(GbModel);

/// Trains on a row-major `n_rows × n_cols` matrix. `params_json` may be
/// null for defaults.
///
/// # Safety
/// `x` must hold `n_rows·n_cols` values, `y` `n_rows` values; `params_json`
/// is null or nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_gb_train(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const f64,
    params_json: *const c_char,
    out: *mut *mut GrGbModel,
) -> GrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Failure::Invalid("matrix size overflows".into()))?;
        if n_cols == 0 {
            return Err(Failure::Invalid("n_cols must be positive".into()));
        }
        let x = in_slice(x, len, "x")?;
        let y = in_slice(y, n_rows, "y")?;
        let params: GbParams = match opt_str(params_json, "params_json")? {
            Some(text) => serde_json::from_str(text)
                .map_err(|e| Failure::Core(georeduce::Error::Config(e.to_string())))?,
            None => GbParams::default(),
        };
        let rows: Vec<Vec<f64>> = x.chunks(n_cols).map(<[f64]>::to_vec).collect();
        *out = Box::into_raw(Box::new(GrGbModel(train_gb(&rows, y, &params)?)));
        Ok(())
    })
}

/// Reloads a model saved with [`gr_gb_to_text`].
///
/// # Safety
/// `text` must be nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_gb_from_text(
    text: *const c_char,
    out: *mut *mut GrGbModel,
) -> GrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let text = opt_str(text, "text")?.ok_or(Failure::Null("text"))?;
        *out = Box::into_raw(Box::new(GrGbModel(GbModel::from_text(text)?)));
        Ok(())
    })
}

/// Text serialization; release with [`gr_string_free`].
///
/// # Safety
/// `m` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_gb_to_text(m: *const GrGbModel, out: *mut *mut c_char) -> GrStatus {
    guard(|| {
        let m = in_ref(m, "model")?;
        let out = out_ref(out, "out")?;
        *out = into_c_string(m.0.to_text())?;
        Ok(())
    })
}

/// Predicts one row of `n_cols` features.
///
/// # Safety
/// `m` must be a live handle; `x` must hold `n_cols` values; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn gr_gb_predict(
    m: *const GrGbModel,
    x: *const f64,
    n_cols: usize,
    out: *mut f64,
) -> GrStatus {
    guard(|| {
        let m = in_ref(m, "model")?;
        let out = out_ref(out, "out")?;
        *out = m.0.predict(in_slice(x, n_cols, "x")?)?;
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gr_gb_free(m: *mut GrGbModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Outcome of a semi-supervised reduction.
pub struct GrReport(ReductionReport);

/// Runs the full reduction. `config_json` is a JSON reduction config, or
/// null for defaults.
///
/// # Safety
/// `config_json` is null or nul-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_reduce(
    config_json: *const c_char,
    out: *mut *mut GrReport,
) -> GrStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let cfg: ReductionConfig = match opt_str(config_json, "config_json")? {
            Some(text) => serde_json::from_str(text)
                .map_err(|e| Failure::Core(georeduce::Error::Config(e.to_string())))?,
            None => ReductionConfig::default(),
        };
        let r = semi_supervised_reduce(&cfg)?;
        *out = Box::into_raw(Box::new(GrReport(r.report)));
        Ok(())
    })
}

/// # Safety
/// `r` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn gr_report_n_representatives(
    r: *const GrReport,
    out: *mut usize,
) -> GrStatus {
    guard(|| {
        let r = in_ref(r, "report")?;
        *out_ref(out, "out")? = r.0.representatives.len();
        Ok(())
    })
}

/// Representative `index` in cluster order.
///
/// # Safety
/// `r` must be a live report handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_representative(
    r: *const GrReport,
    index: usize,
    out_id: *mut u32,
    out_cluster: *mut u32,
    out_predicted_oip: *mut f64,
    out_true_oip: *mut f64,
) -> GrStatus {
    guard(|| {
        let r = in_ref(r, "report")?;
        let rep = r.0.representatives.get(index).ok_or_else(|| {
            Failure::Invalid(format!(
                "index {index} out of {} representatives",
                r.0.representatives.len()
            ))
        })?;
        *out_ref(out_id, "out_id")? = rep.id.get() as u32;
        *out_ref(out_cluster, "out_cluster")? = rep.cluster;
        *out_ref(out_predicted_oip, "out_predicted_oip")? = rep.predicted_oip;
        *out_ref(out_true_oip, "out_true_oip")? = rep.true_oip;
        Ok(())
    })
}

/// Number of models evaluated with the oracle for training.
///
/// # Safety
/// `r` must be a live report handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_n_samples(r: *const GrReport, out: *mut usize) -> GrStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(r, "report")?.0.sample_ids.len();
        Ok(())
    })
}

/// Rand agreement with the histogram gold standard, for the predicted-OIP
/// map and for a Euclidean map.
///
/// # Safety
/// `r` must be a live report handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_rand_vs_gold(
    r: *const GrReport,
    out_semi: *mut f64,
    out_euclidean: *mut f64,
) -> GrStatus {
    guard(|| {
        let r = in_ref(r, "report")?;
        *out_ref(out_semi, "out_semi")? = r.0.rand_vs_gold;
        *out_ref(out_euclidean, "out_euclidean")? = r.0.euclidean_sofm_rand_vs_gold;
        Ok(())
    })
}

/// Size-weighted mean within-cluster true-OIP range, for the predicted-OIP
/// map and for a Euclidean map.
///
/// # Safety
/// `r` must be a live report handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_true_spread(
    r: *const GrReport,
    out_semi: *mut f64,
    out_euclidean: *mut f64,
) -> GrStatus {
    guard(|| {
        let r = in_ref(r, "report")?;
        *out_ref(out_semi, "out_semi")? = r.0.true_spread.mean_range;
        *out_ref(out_euclidean, "out_euclidean")? = r.0.euclidean_sofm_true_spread.mean_range;
        Ok(())
    })
}

/// Cluster of every model, noise as −1. `len` must equal the model count.
///
/// # Safety
/// `r` must be a live report handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn gr_report_clusters(
    r: *const GrReport,
    out: *mut i64,
    len: usize,
) -> GrStatus {
    guard(|| {
        let r = in_ref(r, "report")?;
        if len != r.0.clusters.len() {
            return Err(Failure::Invalid(format!(
                "buffer must hold {} values, got {len}",
                r.0.clusters.len()
            )));
        }
        out_slice(out, len, "out")?.copy_from_slice(&r.0.clusters);
        Ok(())
    })
}

/// The report as JSON; release with [`gr_string_free`].
///
/// # Safety
/// `r` must be a live report handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_to_json(r: *const GrReport, out: *mut *mut c_char) -> GrStatus {
    guard(|| {
        let r = in_ref(r, "report")?;
        *out_ref(out, "out")? = into_c_string(r.0.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`gr_reduce`] and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gr_report_free(r: *mut GrReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
