//! Browser bindings: downsampling previews, ladder costs and cascade traces
//! for a model file loaded in the page.
//!
//! The `*_impl` functions hold the logic and are plain Rust so they can be
//! tested off the browser; the exported wrappers only convert errors.

use std::path::Path;

use rescascade_core::cascade::{classify_case, CascadePolicy, CascadeTrace};
use rescascade_core::classifiers::{decode_model, ConfidenceScore, LogisticModel};
use rescascade_core::{Image, Pathway, ResolutionLadder};
use wasm_bindgen::prelude::*;

fn parse_factors(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("`{s}` is not a factor")))
        .collect()
}

fn gray_image(pixels: &[u8], width: usize, height: usize) -> Result<Image, String> {
    Image::from_bytes(width, height, 1, pixels).map_err(|e| e.to_string())
}

pub fn downsample_preview_impl(
    pixels: &[u8],
    width: usize,
    height: usize,
    factor: usize,
    pathway: &str,
) -> Result<Vec<u8>, String> {
    let img = gray_image(pixels, width, height)?;
    let pathway: Pathway = pathway
        .parse()
        .map_err(|e: rescascade_core::Error| e.to_string())?;
    let out = pathway.apply(&img, factor).map_err(|e| e.to_string())?;
    Ok(out
        .pixels()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect())
}

pub fn ladder_costs_impl(
    width: usize,
    height: usize,
    channels: usize,
    factors: &str,
) -> Result<Vec<u32>, String> {
    let ladder = ResolutionLadder::new(parse_factors(factors)?).map_err(|e| e.to_string())?;
    ladder
        .validate_for(width, height)
        .map_err(|e| e.to_string())?;
    Ok(ladder
        .cumulative_costs(width, height, channels)
        .into_iter()
        .map(|c| c as u32)
        .collect())
}

/// Grayscale image to a downsampled-then-restored rendition, as bytes.
#[wasm_bindgen]
pub fn downsample_preview(
    pixels: &[u8],
    width: usize,
    height: usize,
    factor: usize,
    pathway: &str,
) -> Result<Vec<u8>, JsError> {
    downsample_preview_impl(pixels, width, height, factor, pathway).map_err(|e| JsError::new(&e))
}

/// Cumulative bytes read when a cascade stops at each stage.
#[wasm_bindgen]
pub fn ladder_costs(
    width: usize,
    height: usize,
    channels: usize,
    factors: &str,
) -> Result<Vec<u32>, JsError> {
    ladder_costs_impl(width, height, channels, factors).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct TraceView {
    trace: CascadeTrace,
}

#[wasm_bindgen]
impl TraceView {
    #[wasm_bindgen(getter)]
    pub fn predicted_class(&self) -> usize {
        self.trace.predicted_class
    }

    #[wasm_bindgen(getter)]
    pub fn cumulative_bytes(&self) -> u32 {
        self.trace.cumulative_bytes as u32
    }

    #[wasm_bindgen(getter)]
    pub fn stage_count(&self) -> usize {
        self.trace.stages.len()
    }

    pub fn stage_factor(&self, i: usize) -> usize {
        self.trace.stages[i].factor
    }

    pub fn stage_class(&self, i: usize) -> usize {
        self.trace.stages[i].predicted_class
    }

    pub fn stage_confidence(&self, i: usize) -> f64 {
        self.trace.stages[i].confidence
    }

    pub fn stage_bytes(&self, i: usize) -> u32 {
        self.trace.stages[i].bytes as u32
    }

    pub fn stage_propensities(&self, i: usize) -> Vec<f64> {
        self.trace.stages[i].propensities.values().to_vec()
    }
}

#[wasm_bindgen]
pub struct CascadeDemo {
    model: LogisticModel,
}

impl CascadeDemo {
    pub fn from_bytes(bytes: &[u8]) -> Result<CascadeDemo, String> {
        let model = decode_model(bytes, Path::new("model")).map_err(|e| e.to_string())?;
        Ok(CascadeDemo { model })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn trace_impl(
        &self,
        pixels: &[u8],
        width: usize,
        height: usize,
        threshold: f64,
        factors: &str,
        pathway: &str,
        confidence: &str,
    ) -> Result<TraceView, String> {
        let img = gray_image(pixels, width, height)?;
        let err = |e: rescascade_core::Error| e.to_string();
        let ladder = ResolutionLadder::new(parse_factors(factors)?).map_err(err)?;
        let policy = CascadePolicy::new(ladder, threshold)
            .map_err(err)?
            .with_pathway(pathway.parse().map_err(err)?);
        let score: ConfidenceScore = confidence.parse().map_err(err)?;
        let model = self.model.clone().with_confidence(score);
        let trace = classify_case(&model, &img, &policy).map_err(err)?;
        Ok(TraceView { trace })
    }
}

#[wasm_bindgen]
impl CascadeDemo {
    /// Parses a model file produced by `rescascade train`.
    #[wasm_bindgen(constructor)]
    pub fn new(bytes: &[u8]) -> Result<CascadeDemo, JsError> {
        CascadeDemo::from_bytes(bytes).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn input_size(&self) -> usize {
        self.model.pca().input_dim()
    }

    #[wasm_bindgen(getter)]
    pub fn num_classes(&self) -> usize {
        self.model.weights().rows()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn trace(
        &self,
        pixels: &[u8],
        width: usize,
        height: usize,
        threshold: f64,
        factors: &str,
        pathway: &str,
        confidence: &str,
    ) -> Result<TraceView, JsError> {
        self.trace_impl(
            pixels, width, height, threshold, factors, pathway, confidence,
        )
        .map_err(|e| JsError::new(&e))
    }
}
