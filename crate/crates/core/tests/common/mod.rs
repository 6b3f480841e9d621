#![allow(dead_code)]

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use garment_edit::backends::{MockTransport, VirtualClock};
use garment_edit::pipeline::{Manifest, Pipeline, RunConfig, RunSummary, Stage};

/// Gradient PNG of `size`x`size`; `shade` makes distinct images.
pub fn png(size: u32, shade: u8) -> Vec<u8> {
    let img = image::RgbImage::from_fn(size, size, |x, y| image::Rgb([shade, (x % 256) as u8, (y % 256) as u8]));
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
    buf.into_inner()
}

/// Writes `count` distinct 512px PNGs into `dir/corpus` and returns their paths.
pub fn corpus(dir: &Path, count: u8) -> Vec<PathBuf> {
    let corpus = dir.join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    (0..count)
        .map(|i| {
            let p = corpus.join(format!("garment_{i}.png"));
            std::fs::write(&p, png(512, 40 + i * 50)).unwrap();
            p
        })
        .collect()
}

pub fn config(output_dir: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.output_dir = output_dir.to_path_buf();
    cfg.run.seed = seed;
    cfg
}

pub fn run_with(
    cfg: RunConfig,
    transport: Arc<MockTransport>,
    images: &[PathBuf],
    until: Stage,
) -> (Manifest, RunSummary) {
    Pipeline::new(cfg, transport, Arc::new(VirtualClock::new())).unwrap().run(images, until).unwrap()
}

pub fn run_mock(cfg: RunConfig, images: &[PathBuf]) -> (Manifest, RunSummary, Arc<MockTransport>) {
    let transport = Arc::new(MockTransport::new(cfg.run.seed));
    let (m, s) = run_with(cfg, transport.clone(), images, Stage::Scored);
    (m, s, transport)
}
