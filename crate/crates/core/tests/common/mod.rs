#![allow(dead_code)]

use rand::Rng;
use replica_rank::{ClientSet, RttMatrix, SiteCatalog, SiteId};

/// Fifteen cloud regions with approximate coordinates (lat, lon).
pub const REGIONS: [(&str, f64, f64); 15] = [
    ("NVirginia", 38.9, -77.4),
    ("Ohio", 40.0, -83.0),
    ("NCalifornia", 37.4, -121.9),
    ("Oregon", 45.8, -119.7),
    ("Mumbai", 19.1, 72.9),
    ("Seoul", 37.6, 127.0),
    ("Singapore", 1.35, 103.8),
    ("Sydney", -33.9, 151.2),
    ("Tokyo", 35.7, 139.7),
    ("CanadaCentral", 45.5, -73.6),
    ("Frankfurt", 50.1, 8.7),
    ("Ireland", 53.3, -6.3),
    ("London", 51.5, -0.1),
    ("Paris", 48.9, 2.35),
    ("SaoPaulo", -23.5, -46.6),
];

pub fn regions_catalog() -> SiteCatalog {
    SiteCatalog::from_names(REGIONS.iter().map(|r| r.0)).unwrap()
}

/// Distance-driven RTTs: fibre at ~200 km/ms with a 1.6 path stretch, plus
/// 2 ms of fixed overhead. Rounded to 0.001 ms.
pub fn regions_matrix() -> RttMatrix {
    let n = REGIONS.len();
    let mut m = RttMatrix::uniform(n, 1.0);
    for a in 0..n {
        for b in (a + 1)..n {
            let km = great_circle_km(REGIONS[a].1, REGIONS[a].2, REGIONS[b].1, REGIONS[b].2);
            let rtt = 2.0 * 1.6 * km / 200.0 + 2.0;
            m.set_symmetric(a, b, (rtt * 1000.0).round() / 1000.0);
        }
    }
    m
}

fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().asin()
}

/// Ten clients in Ireland, three in Sydney, five in N. Virginia.
pub fn multiple_clients(catalog: &SiteCatalog) -> ClientSet {
    ClientSet::parse("Ireland:10,Sydney:3,NVirginia:5", catalog).unwrap()
}

pub fn numbered_catalog(n: usize) -> SiteCatalog {
    SiteCatalog::from_names((0..n).map(|i| format!("site{i}"))).unwrap()
}

/// Symmetric matrix with off-diagonal entries uniform in `[lo, hi]`.
pub fn random_matrix<R: Rng>(rng: &mut R, size: usize, lo: f64, hi: f64) -> RttMatrix {
    let mut m = RttMatrix::uniform(size, 1.0);
    for a in 0..size {
        for b in (a + 1)..size {
            m.set_symmetric(a, b, rng.gen_range(lo..=hi));
        }
    }
    m
}

/// One to three distinct client sites with counts 1..=10.
pub fn random_clients<R: Rng>(rng: &mut R, sites: usize) -> ClientSet {
    let k = rng.gen_range(1..=3.min(sites));
    let chosen = rand::seq::index::sample(rng, sites, k);
    ClientSet::new(chosen.iter().map(|s| (SiteId(s), rng.gen_range(1..=10))).collect()).unwrap()
}
