//! C ABI over the spokenvis toolkit.
//!
//! Models are opaque handles created by `*_load` and released by `*_free`.
//! Every fallible call returns an [`SvStatus`]; on failure the message is
//! available from [`sv_last_error`] on the same thread until the next call.
//! Arrays are row-major `double` buffers whose lengths the caller passes
//! explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spokenvis::align::{image_caption_similarity, infer_alignment, AlignParams, CaptionRecord, ImageRecord, REGIONS_PER_IMAGE};
use spokenvis::audio::{Frontend, FrontendConfig, Spectrogram, Waveform};
use spokenvis::io::{read_align_params, read_word_cnn};
use spokenvis::wordcnn::{embed_word, WordCnnParams};
use spokenvis::{Error, Tensor};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Data = 6,
    Config = 7,
    Internal = 8,
    Panic = 9,
}

impl From<&Error> for SvStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Shape(_) => SvStatus::Shape,
            Error::Param(_) | Error::Input(_) | Error::EvalSetup(_) => SvStatus::InvalidArgument,
            Error::Format { .. } => SvStatus::Format,
            Error::Data(_) | Error::Json { .. } => SvStatus::Data,
            Error::Config { .. } => SvStatus::Config,
            Error::Internal(_) => SvStatus::Internal,
            Error::Io { .. } => SvStatus::Io,
        }
    }
}

/// Alignment model plus whether word vectors are unit-normalized.
pub struct SvAlignModel {
    params: AlignParams,
    normalize: bool,
}

pub struct SvWordCnn {
    params: WordCnnParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Failure(SvStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SvStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SvStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SvStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SvStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SvStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside spokenvis");
            SvStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len < need {
        return Err(invalid(format!("`{what}` holds {len} values, {need} needed")));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, value: T) {
    if !p.is_null() {
        *p = value;
    }
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next spokenvis call on this thread.
#[no_mangle]
pub extern "C" fn sv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads an alignment bundle directory.
///
/// # Safety
/// `dir` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sv_align_model_load(dir: *const c_char, out: *mut *mut SvAlignModel) -> SvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let dir = path_arg(dir, "dir")?;
        let (params, header) = read_align_params(dir)?;
        *out = Box::into_raw(Box::new(SvAlignModel { params, normalize: header.config.normalize_words }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`sv_align_model_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sv_align_model_free(model: *mut SvAlignModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Joint dimension `h`, region dimension and word dimension. Any output
/// pointer may be null.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn sv_align_model_dims(
    model: *const SvAlignModel,
    h: *mut usize,
    d_i: *mut usize,
    d_w: *mut usize,
) -> SvStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(h, m.params.h());
        write_out(d_i, m.params.d_i());
        write_out(d_w, m.params.d_w());
        Ok(())
    })
}

unsafe fn records(
    m: &SvAlignModel,
    regions: *const f64,
    n_regions: usize,
    words: *const f64,
    n_words: usize,
) -> Result<(ImageRecord, CaptionRecord), Failure> {
    if n_regions != REGIONS_PER_IMAGE {
        return Err(invalid(format!("{n_regions} regions, expected {REGIONS_PER_IMAGE}")));
    }
    if n_words == 0 {
        return Err(invalid("caption has no words"));
    }
    let (d_i, d_w) = (m.params.d_i(), m.params.d_w());
    let r = slice_arg(regions, n_regions * d_i, "regions")?;
    let w = slice_arg(words, n_words * d_w, "words")?;
    let image = ImageRecord::new("image", Tensor::new(vec![n_regions, d_i], r.to_vec())?)?;
    let caption = CaptionRecord::new("caption", "image", Tensor::new(vec![n_words, d_w], w.to_vec())?)?;
    Ok((image, caption))
}

/// Image-caption score for `n_regions × d_I` regions and `n_words × d_W`
/// word vectors.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sv_align_similarity(
    model: *const SvAlignModel,
    regions: *const f64,
    n_regions: usize,
    words: *const f64,
    n_words: usize,
    out: *mut f64,
) -> SvStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (image, caption) = records(m, regions, n_regions, words, n_words)?;
        *out = image_caption_similarity(&image, &caption, &m.params, m.normalize)?;
        Ok(())
    })
}

/// Best region and its score for every word. Scores at or below zero mean
/// the word is not linked.
///
/// # Safety
/// Buffers must hold the stated number of values; `region_index` and
/// `score` must each hold `n_words` entries.
#[no_mangle]
pub unsafe extern "C" fn sv_align_infer(
    model: *const SvAlignModel,
    regions: *const f64,
    n_regions: usize,
    words: *const f64,
    n_words: usize,
    region_index: *mut usize,
    score: *mut f64,
) -> SvStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if region_index.is_null() || score.is_null() {
            return Err(null("region_index/score"));
        }
        let (image, caption) = records(m, regions, n_regions, words, n_words)?;
        let links = infer_alignment(&image, &caption, &m.params, m.normalize)?;
        let idx = std::slice::from_raw_parts_mut(region_index, n_words);
        let sc = std::slice::from_raw_parts_mut(score, n_words);
        for (t, link) in links.iter().enumerate() {
            idx[t] = link.region_index;
            sc[t] = link.score;
        }
        Ok(())
    })
}

/// Loads a word-classifier bundle directory.
///
/// # Safety
/// `dir` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sv_word_cnn_load(dir: *const c_char, out: *mut *mut SvWordCnn) -> SvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let dir = path_arg(dir, "dir")?;
        let (params, _) = read_word_cnn(dir)?;
        *out = Box::into_raw(Box::new(SvWordCnn { params }));
        Ok(())
    })
}

/// # Safety
/// `cnn` must come from [`sv_word_cnn_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sv_word_cnn_free(cnn: *mut SvWordCnn) {
    if !cnn.is_null() {
        drop(Box::from_raw(cnn));
    }
}

/// Input grid and word-vector length. Any output pointer may be null.
///
/// # Safety
/// `cnn` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn sv_word_cnn_dims(
    cnn: *const SvWordCnn,
    n_bands: *mut usize,
    n_frames: *mut usize,
    embed_dim: *mut usize,
) -> SvStatus {
    guard(|| {
        let c = cnn.as_ref().ok_or_else(|| null("cnn"))?;
        let arch = c.params.arch();
        write_out(n_bands, arch.n_bands);
        write_out(n_frames, arch.n_frames);
        write_out(embed_dim, arch.fc2);
        Ok(())
    })
}

/// Word vector for one `n_bands × n_frames` spectrogram.
///
/// # Safety
/// `spectrogram` must hold `n_bands * n_frames` doubles and `out` at least
/// `out_len`.
#[no_mangle]
pub unsafe extern "C" fn sv_word_cnn_embed(
    cnn: *const SvWordCnn,
    spectrogram: *const f64,
    n_bands: usize,
    n_frames: usize,
    out: *mut f64,
    out_len: usize,
) -> SvStatus {
    guard(|| {
        let c = cnn.as_ref().ok_or_else(|| null("cnn"))?;
        let data = slice_arg(spectrogram, n_bands * n_frames, "spectrogram")?;
        let spec = Spectrogram::from_tensor(Tensor::new(vec![n_bands, n_frames], data.to_vec())?)?;
        let v = embed_word(&spec, &c.params)?;
        out_slice(out, out_len, v.len(), "out")?[..v.len()].copy_from_slice(&v);
        Ok(())
    })
}

/// Fixed-size log-mel spectrogram of mono samples in [-1, 1] with the
/// default frontend (16 kHz, 40 bands × 100 frames, band-major).
///
/// # Safety
/// `samples` must hold `n_samples` doubles and `out` at least `out_len`.
#[no_mangle]
pub unsafe extern "C" fn sv_featurize(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    out: *mut f64,
    out_len: usize,
) -> SvStatus {
    guard(|| {
        let s = slice_arg(samples, n_samples, "samples")?;
        let frontend = Frontend::new(FrontendConfig::default())?;
        let spec = frontend.featurize(&Waveform::new(s.to_vec(), sample_rate)?)?;
        let values = spec.as_tensor().data();
        out_slice(out, out_len, values.len(), "out")?[..values.len()].copy_from_slice(values);
        Ok(())
    })
}
