use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_MONTAGE_CSV: &str = include_str!("../../data/montage30.csv");

/// Ordered channel list with head-plane coordinates on the unit disc.
///
/// Coordinates use an azimuthal projection with the vertex (Cz) at the
/// origin, `+y` towards the nose and `+x` towards the right ear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Montage {
    channels: Vec<String>,
    coordinates: Vec<[f64; 2]>,
    reference: String,
}

impl Montage {
    pub fn new(
        channels: Vec<String>,
        coordinates: Vec<[f64; 2]>,
        reference: impl Into<String>,
    ) -> Result<Self> {
        if channels.len() != coordinates.len() {
            return Err(Error::Montage(format!(
                "{} channel names but {} coordinates",
                channels.len(),
                coordinates.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &channels {
            if name.trim().is_empty() {
                return Err(Error::Montage("empty channel name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Montage(format!("duplicate channel name {name}")));
            }
        }
        for (name, [x, y]) in channels.iter().zip(&coordinates) {
            if !x.is_finite() || !y.is_finite() || x * x + y * y > 1.0 + 1e-3 {
                return Err(Error::Montage(format!(
                    "channel {name} at ({x}, {y}) lies outside the unit disc"
                )));
            }
        }
        Ok(Montage {
            channels,
            coordinates,
            reference: reference.into(),
        })
    }

    /// The 30-channel 10-20 cap used for recording, referenced to A1.
    pub fn default_30() -> Self {
        Self::from_csv(DEFAULT_MONTAGE_CSV, "A1").expect("bundled montage is valid")
    }

    /// Parses `channel,x,y` rows; `#` lines and the header are skipped.
    pub fn from_csv(text: &str, reference: &str) -> Result<Self> {
        let mut channels = Vec::new();
        let mut coordinates = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    format!("line {}", lineno + 1),
                    "expected channel,x,y",
                ));
            }
            let coord = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::parse(
                        format!("line {}", lineno + 1),
                        format!("bad coordinate {s:?}: {e}"),
                    )
                })
            };
            channels.push(fields[0].to_string());
            coordinates.push([coord(fields[1])?, coord(fields[2])?]);
        }
        Montage::new(channels, coordinates, reference)
    }

    /// Montage with the given names placed evenly on a circle of radius 0.5.
    /// Used when a file carries channel names that the default cap lacks.
    pub fn generic(channels: Vec<String>) -> Result<Self> {
        let n = channels.len().max(1) as f64;
        let coordinates = (0..channels.len())
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n;
                [0.5 * a.cos(), 0.5 * a.sin()]
            })
            .collect();
        Montage::new(channels, coordinates, "unknown")
    }

    /// Resolves a list of channel names against this montage, keeping the
    /// given order. Falls back to [`Montage::generic`] when any is unknown.
    pub fn resolve(&self, names: &[String]) -> Result<Self> {
        let picked: Option<Vec<[f64; 2]>> = names
            .iter()
            .map(|n| self.index_of(n).map(|i| self.coordinates[i]))
            .collect();
        match picked {
            Some(coordinates) => Montage::new(names.to_vec(), coordinates, self.reference.clone()),
            None => Montage::generic(names.to_vec()),
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn coordinates(&self) -> &[[f64; 2]] {
        &self.coordinates
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    /// Case-insensitive lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let [xa, ya] = self.coordinates[a];
        let [xb, yb] = self.coordinates[b];
        (xa - xb).hypot(ya - yb)
    }

    /// Channels adjacent to `index`: those no further than 1.5 times the
    /// distance to its nearest other channel.
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let nearest = (0..self.len())
            .filter(|&j| j != index)
            .map(|j| self.distance(index, j))
            .fold(f64::INFINITY, f64::min);
        (0..self.len())
            .filter(|&j| j != index && self.distance(index, j) <= 1.5 * nearest + 1e-12)
            .collect()
    }

    /// `index` itself or one of its [`Montage::neighbors`].
    pub fn is_at_or_adjacent(&self, index: usize, target: usize) -> bool {
        index == target || self.neighbors(target).contains(&index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_montage_has_thirty_channels_with_c3_c4() {
        let m = Montage::default_30();
        assert_eq!(m.len(), 30);
        assert!(m.index_of("C3").is_some());
        assert!(m.index_of("C4").is_some());
        assert_eq!(m.reference(), "A1");
        for [x, y] in m.coordinates() {
            assert!(x * x + y * y <= 1.0 + 1e-3);
        }
    }

    #[test]
    fn c3_neighbors_are_the_adjacent_central_sites() {
        let m = Montage::default_30();
        let c3 = m.index_of("C3").unwrap();
        let names: Vec<&str> = m
            .neighbors(c3)
            .into_iter()
            .map(|i| m.channels()[i].as_str())
            .collect();
        assert_eq!(names, vec!["FC3", "CP3"]);
    }

    #[test]
    fn rejects_duplicates_empty_names_and_points_off_the_disc() {
        let dup = Montage::new(vec!["C3".into(), "C3".into()], vec![[0.0, 0.0]; 2], "A1");
        assert!(matches!(dup, Err(Error::Montage(_))));
        let empty = Montage::new(vec![" ".into()], vec![[0.0, 0.0]], "A1");
        assert!(matches!(empty, Err(Error::Montage(_))));
        let outside = Montage::new(vec!["X".into()], vec![[0.9, 0.9]], "A1");
        assert!(matches!(outside, Err(Error::Montage(_))));
    }

    #[test]
    fn resolve_keeps_file_order_and_falls_back_to_generic() {
        let m = Montage::default_30();
        let sub = m.resolve(&["C4".into(), "C3".into()]).unwrap();
        assert_eq!(sub.channels(), &["C4".to_string(), "C3".to_string()]);
        assert_eq!(sub.coordinates()[0], [0.5, 0.0]);
        let other = m.resolve(&["a".into(), "b".into()]).unwrap();
        assert_eq!(other.reference(), "unknown");
    }
}
