use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::Write;

use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }
}

/// 3GPP 36.814 urban-micro NLOS path loss in dB for a 3D distance in metres.
pub fn path_loss_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    36.7 * distance_m.log10() + 22.7 + 26.0 * carrier_ghz.log10()
}

/// Geometry, large-scale fading, association masks and pilot assignment of
/// one network realisation. Matrices are indexed `(ap, terminal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub ap_pos: Vec<Position>,
    pub user_pos: Vec<Position>,
    pub device_pos: Vec<Position>,
    /// M x K_u user large-scale fading, linear.
    pub alpha: DMatrix<f64>,
    /// M x K_d device large-scale fading, linear.
    pub beta: DMatrix<f64>,
    pub user_assoc: DMatrix<bool>,
    pub device_assoc: DMatrix<bool>,
    pub user_pilot: Vec<usize>,
    pub device_pilot: Vec<usize>,
    pub num_pilots: usize,
}

impl Deployment {
    /// Builds a deployment from given fading matrices (no geometry). The
    /// association is recomputed with [`associate`].
    pub fn from_lsf(
        alpha: DMatrix<f64>,
        beta: DMatrix<f64>,
        serving_aps: usize,
        user_pilot: Vec<usize>,
        device_pilot: Vec<usize>,
        num_pilots: usize,
    ) -> Result<Self> {
        let m = alpha.nrows().max(beta.nrows());
        if alpha.ncols() > 0 && alpha.nrows() != m || beta.ncols() > 0 && beta.nrows() != m {
            return Err(Error::Dimension("alpha and beta must have the same AP count".into()));
        }
        if user_pilot.len() != alpha.ncols() || device_pilot.len() != beta.ncols() {
            return Err(Error::Dimension("one pilot per terminal is required".into()));
        }
        if user_pilot.iter().chain(&device_pilot).any(|&p| p >= num_pilots) {
            return Err(Error::Dimension("pilot index out of range".into()));
        }
        let user_assoc = associate_all(&alpha, serving_aps)?;
        let device_assoc = associate_all(&beta, serving_aps)?;
        Ok(Self {
            ap_pos: Vec::new(),
            user_pos: Vec::new(),
            device_pos: Vec::new(),
            alpha,
            beta,
            user_assoc,
            device_assoc,
            user_pilot,
            device_pilot,
            num_pilots,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.alpha.nrows().max(self.beta.nrows())
    }

    pub fn num_users(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn num_devices(&self) -> usize {
        self.beta.ncols()
    }

    /// |phi_k^H phi_u|^2 for unit-norm pilots drawn from an orthonormal set.
    pub fn user_user_overlap(&self, k: usize, u: usize) -> f64 {
        overlap(self.user_pilot[k], self.user_pilot[u])
    }

    pub fn device_device_overlap(&self, k: usize, d: usize) -> f64 {
        overlap(self.device_pilot[k], self.device_pilot[d])
    }

    pub fn user_device_overlap(&self, u: usize, d: usize) -> f64 {
        overlap(self.user_pilot[u], self.device_pilot[d])
    }

    /// Large-scale fading vector: all alpha then all beta, AP index outermost.
    pub fn lsf_vector(&self) -> Vec<f64> {
        let mut phi = Vec::with_capacity(self.alpha.len() + self.beta.len());
        for m in 0..self.alpha.nrows() {
            phi.extend(self.alpha.row(m).iter());
        }
        for m in 0..self.beta.nrows() {
            phi.extend(self.beta.row(m).iter());
        }
        phi
    }

    /// Writes a debugging dump. Columns:
    /// `kind,index,ap,x_m,y_m,z_m,lsf,associated,pilot`; terminal rows leave
    /// `ap`, `lsf` and `associated` empty, link rows leave the coordinates empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "kind,index,ap,x_m,y_m,z_m,lsf,associated,pilot")?;
        for (m, p) in self.ap_pos.iter().enumerate() {
            writeln!(out, "ap,{m},,{},{},{},,,", p.x, p.y, p.z)?;
        }
        for (u, p) in self.user_pos.iter().enumerate() {
            writeln!(out, "user,{u},,{},{},{},,,{}", p.x, p.y, p.z, self.user_pilot[u])?;
        }
        for (d, p) in self.device_pos.iter().enumerate() {
            writeln!(out, "device,{d},,{},{},{},,,{}", p.x, p.y, p.z, self.device_pilot[d])?;
        }
        for u in 0..self.num_users() {
            for m in 0..self.num_aps() {
                writeln!(
                    out,
                    "user_link,{u},{m},,,,{},{},",
                    self.alpha[(m, u)],
                    u8::from(self.user_assoc[(m, u)])
                )?;
            }
        }
        for d in 0..self.num_devices() {
            for m in 0..self.num_aps() {
                writeln!(
                    out,
                    "device_link,{d},{m},,,,{},{},",
                    self.beta[(m, d)],
                    u8::from(self.device_assoc[(m, d)])
                )?;
            }
        }
        Ok(())
    }
}

fn overlap(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Marks the `serving` largest entries of `lsf`; ties go to the lower index.
pub fn associate(lsf: &[f64], serving: usize) -> Result<Vec<bool>> {
    if serving > lsf.len() {
        return Err(Error::Association {
            serving,
            available: lsf.len(),
        });
    }
    let mut order: Vec<usize> = (0..lsf.len()).collect();
    order.sort_by(|&i, &j| lsf[j].total_cmp(&lsf[i]).then(i.cmp(&j)));
    let mut mask = vec![false; lsf.len()];
    for &i in &order[..serving] {
        mask[i] = true;
    }
    Ok(mask)
}

fn associate_all(lsf: &DMatrix<f64>, serving: usize) -> Result<DMatrix<bool>> {
    let mut mask = DMatrix::from_element(lsf.nrows(), lsf.ncols(), false);
    for k in 0..lsf.ncols() {
        let column: Vec<f64> = lsf.column(k).iter().copied().collect();
        for (m, on) in associate(&column, serving)?.into_iter().enumerate() {
            mask[(m, k)] = on;
        }
    }
    Ok(mask)
}

/// Balanced random pilot assignment for realisation 0.
pub fn assign_pilots(config: &ScenarioConfig) -> (Vec<usize>, Vec<usize>) {
    assign_pilots_indexed(config, 0)
}

/// Each of the K_u + K_d terminals gets one of the tau_p pilots; every pilot is
/// reused either floor or ceil of (K_u + K_d)/tau_p times.
pub fn assign_pilots_indexed(config: &ScenarioConfig, index: u64) -> (Vec<usize>, Vec<usize>) {
    let total = config.num_terminals();
    let tau_p = config.pilot_samples.max(1);
    let mut pilots: Vec<usize> = (0..total).map(|i| i % tau_p).collect();
    let mut rng = stream(config.seed, Domain::Pilots, index);
    pilots.shuffle(&mut rng);
    let devices = pilots.split_off(config.num_users);
    (pilots, devices)
}

pub fn generate_deployment(config: &ScenarioConfig) -> Deployment {
    generate_deployment_indexed(config, 0)
}

/// Realisation `index` of the deployment distribution described by `config`.
///
/// Panics if the configuration is invalid; validate it upstream.
pub fn generate_deployment_indexed(config: &ScenarioConfig, index: u64) -> Deployment {
    let mut rng = stream(config.seed, Domain::Deployment, index);
    let side = config.area_side_m;
    let mut place = |n: usize, z: f64| -> Vec<Position> {
        (0..n)
            .map(|_| Position {
                x: rng.random::<f64>() * side,
                y: rng.random::<f64>() * side,
                z,
            })
            .collect()
    };
    let ap_pos = place(config.num_aps, config.ap_height_m);
    let user_pos = place(config.num_users, config.terminal_height_m);
    let device_pos = place(config.num_devices, config.terminal_height_m);

    let mut shadow_rng = stream(config.seed, Domain::Shadowing, index);
    let shadowing = config
        .shadowing_std_db
        .filter(|&s| s > 0.0)
        .map(|s| Normal::new(0.0, s).expect("finite std"));
    let mut lsf = |terminals: &[Position]| -> DMatrix<f64> {
        DMatrix::from_fn(ap_pos.len(), terminals.len(), |m, k| {
            let mut pl = path_loss_db(ap_pos[m].distance(&terminals[k]), config.carrier_ghz);
            if let Some(dist) = &shadowing {
                pl += dist.sample(&mut shadow_rng);
            }
            10f64.powf(-pl / 10.0)
        })
    };
    let alpha = lsf(&user_pos);
    let beta = lsf(&device_pos);
    let (user_pilot, device_pilot) = assign_pilots_indexed(config, index);

    let user_assoc = associate_all(&alpha, config.serving_aps).expect("validated config");
    let device_assoc = associate_all(&beta, config.serving_aps).expect("validated config");
    Deployment {
        ap_pos,
        user_pos,
        device_pos,
        alpha,
        beta,
        user_assoc,
        device_assoc,
        user_pilot,
        device_pilot,
        num_pilots: config.pilot_samples,
    }
}
