//! Synthetic co-occurrence data with a known latent geometry.
//!
//! Items are scattered uniformly over a `width x 1` rectangle. Each user also
//! gets a random latent position, and their profile is the `profile_len`
//! items nearest to it, so items co-occur exactly when they are close on the
//! rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct LatentManifold {
    pub items: usize,
    pub users: usize,
    pub profile_len: usize,
    pub width: f64,
    pub seed: u64,
}

impl Default for LatentManifold {
    fn default() -> Self {
        LatentManifold {
            items: 2000,
            users: 20_000,
            profile_len: 25,
            width: 2.0,
            seed: 1,
        }
    }
}

/// Generated profiles plus the latent item positions they came from.
#[derive(Debug, Clone)]
pub struct SyntheticProfiles {
    /// `(user_id, item_id)` records.
    pub records: Vec<(String, String)>,
    pub item_ids: Vec<String>,
    pub item_positions: Vec<[f64; 2]>,
}

pub fn item_id(i: usize) -> String {
    format!("item{i:06}")
}

impl LatentManifold {
    pub fn generate(&self) -> SyntheticProfiles {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let item_positions: Vec<[f64; 2]> = (0..self.items)
            .map(|_| [rng.random_range(0.0..self.width), rng.random_range(0.0..1.0)])
            .collect();
        let item_ids: Vec<String> = (0..self.items).map(item_id).collect();
        let k = self.profile_len.min(self.items);
        let mut records = Vec::with_capacity(self.users * k);
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.items);
        for u in 0..self.users {
            let p = [rng.random_range(0.0..self.width), rng.random_range(0.0..1.0)];
            dist.clear();
            dist.extend(item_positions.iter().enumerate().map(|(i, q)| {
                let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                (dx * dx + dy * dy, i)
            }));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < dist.len() {
                dist.select_nth_unstable_by(k, cmp);
            }
            let user = format!("user{u:07}");
            for &(_, i) in &dist[..k] {
                records.push((user.clone(), item_ids[i].clone()));
            }
        }
        SyntheticProfiles {
            records,
            item_ids,
            item_positions,
        }
    }
}
