use std::rc::Rc;

use ndarray::{Array2, Array3, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::{cosine_cutoff, dense, gaussian_rbf, init_embedding, init_linear, NetError, Network};
use crate::chemdata::Molecule;
use crate::rng::{stream, Stream};
use crate::tensor::{concat, ParamStore, Tape, Var};

pub const DEFAULT_MAX_Z: u32 = 86;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffFn {
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PainnConfig {
    #[serde(default = "d_rcut")]
    pub r_cut: f64,
    #[serde(default = "d_nrbf")]
    pub n_rbf: usize,
    #[serde(default = "d_basis")]
    pub n_atom_basis: usize,
    #[serde(default = "d_inter")]
    pub n_interactions: usize,
    #[serde(default = "d_cutoff")]
    pub cutoff_fn: CutoffFn,
    #[serde(default = "d_readout")]
    pub readout: Readout,
    /// Largest atomic number with an embedding row.
    #[serde(default = "d_maxz")]
    pub max_z: u32,
}

fn d_rcut() -> f64 {
    5.0
}
fn d_nrbf() -> usize {
    20
}
fn d_basis() -> usize {
    30
}
fn d_inter() -> usize {
    3
}
fn d_cutoff() -> CutoffFn {
    CutoffFn::Cosine
}
fn d_readout() -> Readout {
    Readout::Mean
}
fn d_maxz() -> u32 {
    DEFAULT_MAX_Z
}

impl Default for PainnConfig {
    fn default() -> Self {
        PainnConfig {
            r_cut: 5.0,
            n_rbf: 20,
            n_atom_basis: 30,
            n_interactions: 3,
            cutoff_fn: CutoffFn::Cosine,
            readout: Readout::Mean,
            max_z: DEFAULT_MAX_Z,
        }
    }
}

impl PainnConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.r_cut > 0.0 && self.r_cut.is_finite()) {
            return Err(NetError::InvalidConfig("r_cut must be positive".into()));
        }
        if self.n_rbf == 0 || self.n_atom_basis < 2 || self.n_interactions == 0 || self.max_z == 0 {
            return Err(NetError::InvalidConfig(
                "n_rbf, n_interactions and max_z must be >= 1 and n_atom_basis >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Flattened graph for a batch of molecules. Edge `e` carries a message
/// from `senders[e]` to `receivers[e]`; both directions are present.
#[derive(Debug, Clone)]
pub struct PainnBatch {
    pub atomic_numbers: Rc<Vec<usize>>,
    pub molecule_of: Rc<Vec<usize>>,
    pub atoms_per_molecule: Vec<usize>,
    pub senders: Rc<Vec<usize>>,
    pub receivers: Rc<Vec<usize>>,
    /// `[E, n_rbf]` Gaussian expansion of edge lengths.
    pub filter_input: Array2<f64>,
    pub cutoff: Array2<f64>,
    /// `[E, 3, 1]` unit vectors from receiver to sender.
    pub directions: Array3<f64>,
}

impl PainnBatch {
    pub fn new(molecules: &[&Molecule], config: &PainnConfig) -> Result<Self, NetError> {
        if molecules.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut z = Vec::new();
        let mut molecule_of = Vec::new();
        let mut counts = Vec::new();
        let (mut senders, mut receivers) = (Vec::new(), Vec::new());
        let mut rbf = Vec::new();
        let mut cut = Vec::new();
        let mut dirs = Vec::new();
        for (m, mol) in molecules.iter().enumerate() {
            let offset = z.len();
            for &zi in &mol.atomic_numbers {
                if zi > config.max_z {
                    return Err(NetError::UnknownElement {
                        z: zi,
                        max_z: config.max_z,
                    });
                }
                z.push(zi as usize);
                molecule_of.push(m);
            }
            counts.push(mol.len());
            for i in 0..mol.len() {
                for j in 0..mol.len() {
                    if i == j {
                        continue;
                    }
                    let (pi, pj) = (mol.positions[i], mol.positions[j]);
                    let d = [pj[0] - pi[0], pj[1] - pi[1], pj[2] - pi[2]];
                    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    if r >= config.r_cut {
                        continue;
                    }
                    receivers.push(offset + i);
                    senders.push(offset + j);
                    let fc = cosine_cutoff(r, config.r_cut);
                    rbf.extend(gaussian_rbf(r, config.n_rbf, config.r_cut));
                    cut.push(fc);
                    dirs.extend(d.iter().map(|c| c / r));
                }
            }
        }
        let e = senders.len();
        Ok(PainnBatch {
            atomic_numbers: Rc::new(z),
            molecule_of: Rc::new(molecule_of),
            atoms_per_molecule: counts,
            senders: Rc::new(senders),
            receivers: Rc::new(receivers),
            filter_input: Array2::from_shape_vec((e, config.n_rbf), rbf).expect("rbf rows"),
            cutoff: Array2::from_shape_vec((e, 1), cut).expect("cutoff rows"),
            directions: Array3::from_shape_vec((e, 3, 1), dirs).expect("direction rows"),
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atomic_numbers.len()
    }

    pub fn n_edges(&self) -> usize {
        self.senders.len()
    }
}

/// Final per-atom features: scalars `[N, F]` and vectors `[N, 3, F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PainnState {
    pub s: Array2<f64>,
    pub v: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct Painn {
    pub config: PainnConfig,
    pub params: ParamStore,
}

impl Painn {
    pub fn new(config: PainnConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let f = config.n_atom_basis;
        let mut rng = stream(seed, "painn-init", 0);
        let mut p = ParamStore::new();
        init_embedding(
            &mut p,
            "embedding.weight",
            config.max_z as usize + 1,
            f,
            &mut rng,
        );
        for i in 0..config.n_interactions {
            let pre = format!("interaction.{i}");
            init_linear(
                &mut p,
                &format!("{pre}.message.phi.0"),
                f,
                f,
                true,
                &mut rng,
            );
            init_linear(
                &mut p,
                &format!("{pre}.message.phi.1"),
                f,
                3 * f,
                true,
                &mut rng,
            );
            init_linear(
                &mut p,
                &format!("{pre}.message.filter"),
                config.n_rbf,
                3 * f,
                true,
                &mut rng,
            );
            init_linear(
                &mut p,
                &format!("{pre}.update.mix"),
                f,
                2 * f,
                false,
                &mut rng,
            );
            init_linear(
                &mut p,
                &format!("{pre}.update.context.0"),
                2 * f,
                f,
                true,
                &mut rng,
            );
            init_linear(
                &mut p,
                &format!("{pre}.update.context.1"),
                f,
                3 * f,
                true,
                &mut rng,
            );
        }
        let half = (f / 2).max(1);
        init_linear(&mut p, "readout.0", f, half, true, &mut rng);
        init_linear(&mut p, "readout.1", half, 1, true, &mut rng);
        Ok(Painn { config, params: p })
    }

    /// Message passing up to (not including) the readout.
    pub fn represent<'t>(
        &self,
        tape: &'t Tape,
        g: &PainnBatch,
    ) -> Result<(Var<'t>, Var<'t>), NetError> {
        let f = self.config.n_atom_basis;
        let n = g.n_atoms();
        let e = g.n_edges();
        let p = &self.params;
        let mut s = tape
            .param(p, "embedding.weight")?
            .index_select(g.atomic_numbers.clone())?;
        let mut v = tape.constant(ArrayD::zeros(IxDyn(&[n, 3, f])));
        let rbf = tape.constant(g.filter_input.clone().into_dyn());
        let fcut = tape.constant(g.cutoff.clone().into_dyn());
        let dirs = tape.constant(g.directions.clone().into_dyn());
        for i in 0..self.config.n_interactions {
            let pre = format!("interaction.{i}");
            // message
            let phi = dense(tape, p, &format!("{pre}.message.phi.0"), s)?.swish();
            let phi = dense(tape, p, &format!("{pre}.message.phi.1"), phi)?;
            let w = dense(tape, p, &format!("{pre}.message.filter"), rbf)?.mul(fcut)?;
            let x = phi.index_select(g.senders.clone())?.mul(w)?;
            let ds = x.narrow(1, 0, f)?;
            let dv_dir = x.narrow(1, f, f)?.reshape(&[e, 1, f])?.mul(dirs)?;
            let dv_vec = x
                .narrow(1, 2 * f, f)?
                .reshape(&[e, 1, f])?
                .mul(v.index_select(g.senders.clone())?)?;
            s = s.add(ds.scatter_add(g.receivers.clone(), n)?)?;
            v = v.add(dv_dir.add(dv_vec)?.scatter_add(g.receivers.clone(), n)?)?;
            // update
            let mixed = dense(
                tape,
                p,
                &format!("{pre}.update.mix"),
                v.reshape(&[n * 3, f])?,
            )?
            .reshape(&[n, 3, 2 * f])?;
            let uv = mixed.narrow(2, 0, f)?;
            let vv = mixed.narrow(2, f, f)?;
            let vv_norm = vv.l2_norm(1)?;
            let ctx = concat(&[s, vv_norm], 1)?;
            let a = dense(tape, p, &format!("{pre}.update.context.0"), ctx)?.swish();
            let a = dense(tape, p, &format!("{pre}.update.context.1"), a)?;
            let a_vv = a.narrow(1, 0, f)?;
            let a_sv = a.narrow(1, f, f)?;
            let a_ss = a.narrow(1, 2 * f, f)?;
            v = v.add(a_vv.reshape(&[n, 1, f])?.mul(uv)?)?;
            s = s.add(a_ss)?.add(a_sv.mul(uv.dot(vv, 1)?)?)?;
        }
        Ok((s, v))
    }

    pub fn state(&self, mol: &Molecule) -> Result<PainnState, NetError> {
        let g = PainnBatch::new(&[mol], &self.config)?;
        let tape = Tape::new();
        let (s, v) = self.represent(&tape, &g)?;
        let s = s.value().clone().into_dimensionality().expect("rank 2");
        let v = v.value().clone().into_dimensionality().expect("rank 3");
        Ok(PainnState { s, v })
    }

    pub fn forward_graph<'t>(&self, tape: &'t Tape, g: &PainnBatch) -> Result<Var<'t>, NetError> {
        let (s, _) = self.represent(tape, g)?;
        let h = dense(tape, &self.params, "readout.0", s)?.swish();
        let atom_out = dense(tape, &self.params, "readout.1", h)?.reshape(&[g.n_atoms()])?;
        let n_mol = g.atoms_per_molecule.len();
        let total = atom_out.scatter_add(g.molecule_of.clone(), n_mol)?;
        Ok(match self.config.readout {
            Readout::Sum => total,
            Readout::Mean => {
                let inv: Vec<f64> = g
                    .atoms_per_molecule
                    .iter()
                    .map(|&c| 1.0 / c.max(1) as f64)
                    .collect();
                total.mul(tape.constant(ndarray::Array1::from(inv).into_dyn()))?
            }
        })
    }

    pub fn predict_one(&self, mol: &Molecule) -> Result<f64, NetError> {
        let tape = Tape::new();
        let g = PainnBatch::new(&[mol], &self.config)?;
        Ok(self.forward_graph(&tape, &g)?.item())
    }
}

impl Network for Painn {
    type Input = Molecule;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward<'t>(
        &mut self,
        tape: &'t Tape,
        batch: &[&Molecule],
        _train: bool,
        _rng: &mut Stream,
    ) -> Result<Var<'t>, NetError> {
        let g = PainnBatch::new(batch, &self.config)?;
        self.forward_graph(tape, &g)
    }

    fn architecture(&self) -> serde_json::Value {
        serde_json::json!({ "model": "painn", "config": self.config })
    }

    /// Embedding joins the first interaction block; readout is last.
    fn layer_groups(&self) -> Vec<(String, Vec<String>)> {
        let names: Vec<&str> = self.params.names().collect();
        let mut groups = Vec::new();
        for i in 0..self.config.n_interactions {
            let prefix = format!("interaction.{i}.");
            let mut members: Vec<String> = names
                .iter()
                .filter(|n| n.starts_with(&prefix))
                .map(|n| n.to_string())
                .collect();
            if i == 0 {
                members.insert(0, "embedding.weight".into());
            }
            groups.push((format!("block{i}"), members));
        }
        groups.push((
            "readout".into(),
            names
                .iter()
                .filter(|n| n.starts_with("readout."))
                .map(|n| n.to_string())
                .collect(),
        ));
        groups
    }
}
