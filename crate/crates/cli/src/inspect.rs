//! `rptsc inspect`: every kernel of the first two convolution layers as its
//! own min-max normalized PNG tile, plus one contact sheet per layer.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rptsc_core::cnn::{checkpoint, ConvLayer, Layer};
use rptsc_core::rp::{write_png, GrayImage};

use crate::InspectArgs;

/// Pixels between tiles on a contact sheet, drawn white.
const SHEET_GAP: usize = 1;

/// Nearest-neighbour enlargement by an integer factor.
pub fn upscale(img: &GrayImage, factor: usize) -> GrayImage {
    let (h, w) = (img.height * factor, img.width * factor);
    let pixels = (0..h * w)
        .map(|i| img.get(i / w / factor, i % w / factor))
        .collect();
    GrayImage {
        height: h,
        width: w,
        pixels,
    }
}

/// Tiles of equal size laid out row-major, `cols` per row.
pub fn contact_sheet(tiles: &[GrayImage], cols: usize) -> GrayImage {
    let (th, tw) = (tiles[0].height, tiles[0].width);
    let rows = tiles.len().div_ceil(cols);
    let height = rows * th + (rows - 1) * SHEET_GAP;
    let width = cols * tw + (cols - 1) * SHEET_GAP;
    let mut sheet = GrayImage::filled(height, width, 1.0);
    for (t, tile) in tiles.iter().enumerate() {
        let (top, left) = ((t / cols) * (th + SHEET_GAP), (t % cols) * (tw + SHEET_GAP));
        for r in 0..th {
            let dst = (top + r) * width + left;
            sheet.pixels[dst..dst + tw].copy_from_slice(&tile.pixels[r * tw..(r + 1) * tw]);
        }
    }
    sheet
}

/// One normalized tile per `(output, input)` channel pair, output-major.
pub fn kernel_tiles(conv: &ConvLayer, factor: usize) -> Vec<GrayImage> {
    let k = conv.kernel_size;
    conv.kernels
        .chunks_exact(k * k)
        .map(|kernel| upscale(&GrayImage::normalized(k, k, kernel), factor))
        .collect()
}

fn export_layer(conv: &ConvLayer, index: usize, out: &Path, factor: usize) -> Result<usize> {
    let dir = out.join(format!("conv{index}"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let tiles = kernel_tiles(conv, factor);
    for (t, tile) in tiles.iter().enumerate() {
        let name = if conv.in_channels == 1 {
            format!("kernel_{t:02}.png")
        } else {
            format!(
                "kernel_{:02}_{:02}.png",
                t / conv.in_channels,
                t % conv.in_channels
            )
        };
        write_png(tile, &dir.join(name))?;
    }
    let cols = if conv.in_channels == 1 {
        (conv.out_channels as f64).sqrt().ceil() as usize
    } else {
        conv.in_channels
    };
    write_png(
        &contact_sheet(&tiles, cols),
        &out.join(format!("conv{index}_sheet.png")),
    )?;
    Ok(tiles.len())
}

pub fn run(args: &InspectArgs) -> Result<()> {
    if args.scale == 0 {
        bail!("--scale must be at least 1");
    }
    let (net, _) = checkpoint::load(&args.checkpoint)?;
    let convs: Vec<&ConvLayer> = net
        .layers()
        .iter()
        .filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            _ => None,
        })
        .take(2)
        .collect();
    if convs.is_empty() {
        bail!("checkpoint has no convolution layers");
    }
    for (i, conv) in convs.iter().enumerate() {
        let n = export_layer(conv, i + 1, &args.out, args.scale)?;
        println!("conv{}: {n} kernel tiles + sheet", i + 1);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upscale_repeats_pixels() {
        let img = GrayImage::new(1, 2, vec![0.0, 1.0]).unwrap();
        let big = upscale(&img, 2);
        assert_eq!(big.pixels, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn sheet_places_tiles_with_gaps() {
        let tiles = vec![GrayImage::filled(2, 2, 0.0); 3];
        let sheet = contact_sheet(&tiles, 2);
        assert_eq!((sheet.height, sheet.width), (5, 5));
        assert_eq!(sheet.get(0, 0), 0.0);
        assert_eq!(sheet.get(0, 2), 1.0);
        assert_eq!(sheet.get(3, 3), 1.0);
        assert_eq!(sheet.get(4, 1), 0.0);
    }
}
