use super::config::mw_to_db;
use super::power::ChannelPowerMap;
use crate::error::{Error, Result};

/// One slot's spectrum: `N_F` bins in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector(pub Vec<f64>);

/// Spreads each channel's total power uniformly over its bins and converts to dB.
pub fn spectrum_vector(map: &ChannelPowerMap, bins: usize) -> Result<SpectrumVector> {
    let m = map.channels();
    if bins == 0 || !bins.is_multiple_of(m) {
        return Err(Error::config(
            "env.spectrum_bins",
            format!("{bins} is not a positive multiple of {m}"),
        ));
    }
    let per = bins / m;
    let mut out = Vec::with_capacity(bins);
    for c in 0..m {
        let db = mw_to_db(map.total(c) / per as f64);
        out.extend(std::iter::repeat_n(db, per));
    }
    Ok(SpectrumVector(out))
}

/// The last `N_T` spectrum vectors, oldest row first.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumWaterfall {
    rows: usize,
    bins: usize,
    data: Vec<f64>,
}

impl SpectrumWaterfall {
    /// A waterfall whose every sample is `fill_db`.
    pub fn filled(rows: usize, bins: usize, fill_db: f64) -> Self {
        SpectrumWaterfall {
            rows,
            bins,
            data: vec![fill_db; rows * bins],
        }
    }

    pub fn from_rows(rows: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * bins {
            return Err(Error::Shape {
                layer: "waterfall".into(),
                expected: vec![rows, bins],
                got: vec![data.len()],
            });
        }
        Ok(SpectrumWaterfall { rows, bins, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.bins..(i + 1) * self.bins]
    }

    /// Row-major samples, oldest row first.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Drops the oldest rows and appends `new_rows` at the bottom.
    pub fn push_rows(&mut self, new_rows: &[SpectrumVector]) {
        let k = new_rows.len();
        let b = self.bins;
        if k >= self.rows {
            for (dst, src) in self
                .data
                .chunks_exact_mut(b)
                .zip(&new_rows[k - self.rows..])
            {
                dst.copy_from_slice(&src.0);
            }
            return;
        }
        self.data.copy_within(k * b.., 0);
        let start = (self.rows - k) * b;
        for (dst, src) in self.data[start..].chunks_exact_mut(b).zip(new_rows) {
            dst.copy_from_slice(&src.0);
        }
    }
}

/// Per-channel dB summary of one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSpectrum(pub Vec<f64>);

impl CoarseSpectrum {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `c[m] = 10 log10(mean over the hop's slots of the total power on m)`.
pub fn coarse_spectrum(
    slot_maps: &[ChannelPowerMap],
    slots_per_hop: usize,
) -> Result<CoarseSpectrum> {
    coarse_by(slot_maps, slots_per_hop, ChannelPowerMap::total)
}

/// Same as [`coarse_spectrum`] with the user's own signal left out.
pub fn coarse_interference(
    slot_maps: &[ChannelPowerMap],
    slots_per_hop: usize,
) -> Result<CoarseSpectrum> {
    coarse_by(slot_maps, slots_per_hop, ChannelPowerMap::interference)
}

fn coarse_by(
    slot_maps: &[ChannelPowerMap],
    slots_per_hop: usize,
    power: fn(&ChannelPowerMap, usize) -> f64,
) -> Result<CoarseSpectrum> {
    if slot_maps.len() != slots_per_hop || slots_per_hop == 0 {
        return Err(Error::SlotCount {
            expected: slots_per_hop,
            got: slot_maps.len(),
        });
    }
    let m = slot_maps[0].channels();
    let n = slot_maps.len() as f64;
    Ok(CoarseSpectrum(
        (0..m)
            .map(|c| mw_to_db(slot_maps.iter().map(|s| power(s, c)).sum::<f64>() / n))
            .collect(),
    ))
}
