//! Benchmark catalog and study drivers.
//!
//! The catalog collects analytic elastostatic solutions (patch fields,
//! manufactured solutions, a sinusoidally loaded beam, the circular-hole
//! plate) together with their material models. The drivers run patch tests
//! on fixed 16-element meshes, convergence ladders on refined mesh families,
//! and element-spectrum sweeps, and serialize the results as CSV.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Matrix4, Point2, RowVector4, Vector2, Vector3, Vector4};
use thiserror::Error;

use crate::eigenanalysis::{
    sweep_inserted_nodes, sweep_perturbed, sweep_regular, SpectrumReport, PERTURBATION_DELTAS,
};
use crate::element::{ElementError, EllRule};
use crate::mesh::{
    generate_mesh, BoundaryEdge, GridParams, HoledVoronoiParams, MeshError, MeshParams,
    NonconvexParams, PolygonalMesh, VoronoiParams,
};
use crate::polyspace::{material_matrix, MaterialMatrix, MaterialMode, PolyspaceError};
use crate::system::{
    error_norms, solve_bvp, AnalyticField, BoundaryCondition, BoundaryValueProblem,
    ErrorMeasures, SystemError, VectorField, VoigtField,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Material(#[from] PolyspaceError),
    #[error("study configuration: {0}")]
    Configuration(String),
}

/// An analytic reference solution paired with its material model.
pub struct Benchmark {
    pub field: AnalyticField,
    pub material: MaterialMatrix,
}

/// Caps the global worker pool from the `VEMSF_THREADS` environment
/// variable. Unset, unparsable, or zero values leave the default; so does
/// a pool that was already initialized.
pub fn init_thread_cap_from_env() {
    if let Some(n) = std::env::var("VEMSF_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Stress closure σ = C ε from a strain closure.
fn stress_of(c: Matrix3<f64>, strain: &VoigtField) -> VoigtField {
    let strain = strain.clone();
    Arc::new(move |x| c * strain(x))
}

/// Traction closure t = σ(x)·n for a boundary of fixed outward normal.
fn traction_on(field: &AnalyticField, n: Vector2<f64>) -> VectorField {
    let stress = field
        .stress
        .clone()
        .expect("traction data needs a stress closure");
    Arc::new(move |x| {
        let s = stress(x);
        Vector2::new(s[0] * n.x + s[2] * n.y, s[2] * n.x + s[1] * n.y)
    })
}

/// Quadratic displacement patch field on (0,1)², E_Y = 1, ν = 0.3,
/// plane stress. The body force is the constant −div σ of the field.
pub fn quadratic_patch() -> Benchmark {
    let material = material_matrix(1.0, 0.3, MaterialMode::PlaneStress).unwrap();
    let nu = material.nu;
    let eb = material.e_y / (1.0 - nu * nu);
    let displacement: VectorField = Arc::new(|p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector2::new(
            x * x + 3.0 * x * y + 7.0 * y * y + 5.0 * x + 2.0 * y + 8.0,
            6.0 * x * x + 3.0 * x * y + y * y + 4.0 * x + 9.0 * y + 1.0,
        )
    });
    let strain: VoigtField = Arc::new(|p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector3::new(
            2.0 * x + 3.0 * y + 5.0,
            3.0 * x + 2.0 * y + 9.0,
            15.0 * x + 17.0 * y + 6.0,
        )
    });
    let stress = stress_of(material.c, &strain);
    let body_force: VectorField = Arc::new(move |_| {
        Vector2::new(
            -eb * (2.0 + 3.0 * nu + 8.5 * (1.0 - nu)),
            -eb * (2.0 + 3.0 * nu + 7.5 * (1.0 - nu)),
        )
    });
    Benchmark {
        field: AnalyticField {
            label: "quadratic_patch".into(),
            displacement,
            strain: Some(strain),
            stress: Some(stress),
            body_force: Some(body_force),
            extra_degree: 0,
        },
        material,
    }
}

/// Cubic displacement patch field on (0,1)², E_Y = 1, ν = 0.3, plane
/// stress, with body force −div σ.
pub fn cubic_patch() -> Benchmark {
    let material = material_matrix(1.0, 0.3, MaterialMode::PlaneStress).unwrap();
    let nu = material.nu;
    let eb = material.e_y / (1.0 - nu * nu);
    let displacement: VectorField = Arc::new(|p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector2::new(
            3.0 * x.powi(3)
                + 6.0 * x * x * y
                + 7.0 * x * y * y
                + 8.0 * y.powi(3)
                + x * x
                + 3.0 * x * y
                + y * y
                + 5.0 * x
                + 2.0 * y
                + 4.0,
            4.0 * x.powi(3)
                + 7.0 * x * x * y
                + 8.0 * x * y * y
                + 11.0 * y.powi(3)
                + 2.0 * x * x
                + x * y
                + 4.0 * y * y
                + 8.0 * x
                + 9.0 * y
                + 11.0,
        )
    });
    let strain: VoigtField = Arc::new(|p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector3::new(
            9.0 * x * x + 12.0 * x * y + 7.0 * y * y + 2.0 * x + 3.0 * y + 5.0,
            7.0 * x * x + 16.0 * x * y + 33.0 * y * y + x + 8.0 * y + 9.0,
            18.0 * x * x + 28.0 * x * y + 32.0 * y * y + 7.0 * x + 3.0 * y + 10.0,
        )
    });
    let stress = stress_of(material.c, &strain);
    let body_force: VectorField = Arc::new(move |p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector2::new(
            -eb * (18.0 * x + 12.0 * y + 2.0
                + nu * (14.0 * x + 16.0 * y + 1.0)
                + 0.5 * (1.0 - nu) * (28.0 * x + 64.0 * y + 3.0)),
            -eb * (0.5 * (1.0 - nu) * (36.0 * x + 28.0 * y + 7.0)
                + nu * (12.0 * x + 14.0 * y + 3.0)
                + 16.0 * x + 66.0 * y + 8.0),
        )
    });
    Benchmark {
        field: AnalyticField {
            label: "cubic_patch".into(),
            displacement,
            strain: Some(strain),
            stress: Some(stress),
            body_force: Some(body_force),
            extra_degree: 0,
        },
        material,
    }
}

/// Quadratic equilibrium field u = xy, v = x on the bar
/// (0,8) × (−1/2, 1/2), E_Y = 1, ν = 0.3, plane stress. The constant body
/// force −E_Y/(2(1−ν)) e₂ keeps the field in equilibrium.
pub fn quadratic_equilibrium() -> Benchmark {
    let material = material_matrix(1.0, 0.3, MaterialMode::PlaneStress).unwrap();
    let nu = material.nu;
    let fy = -material.e_y / (2.0 * (1.0 - nu));
    let displacement: VectorField = Arc::new(|p: Point2<f64>| Vector2::new(p.x * p.y, p.x));
    let strain: VoigtField = Arc::new(|p: Point2<f64>| Vector3::new(p.y, 0.0, p.x + 1.0));
    let stress = stress_of(material.c, &strain);
    let body_force: VectorField = Arc::new(move |_| Vector2::new(0.0, fy));
    Benchmark {
        field: AnalyticField {
            label: "quadratic_equilibrium".into(),
            displacement,
            strain: Some(strain),
            stress: Some(stress),
            body_force: Some(body_force),
            extra_degree: 0,
        },
        material,
    }
}

/// Cantilever of length L = 8 and depth 1 under an end shear load
/// (plane stress, E_Y = 1, ν = 0.3): the classical cubic equilibrium
/// solution with zero body force on the bar (0,8) × (−1/2, 1/2).
///
/// The load magnitude is normalized for unit tip deflection (P = 3EI/L³)
/// so the unnormalized error norms reflect discretization accuracy rather
/// than the field's scale; the solution is homogeneous in P.
pub fn cantilever_end_load() -> Benchmark {
    let material = material_matrix(1.0, 0.3, MaterialMode::PlaneStress).unwrap();
    let nu = material.nu;
    let e = material.e_y;
    let (length, c) = (8.0f64, 0.5f64);
    let inertia = 2.0 * c.powi(3) / 3.0;
    let p = 3.0 * e * inertia / length.powi(3);
    let f = p / (6.0 * e * inertia);
    let displacement: VectorField = Arc::new(move |q: Point2<f64>| {
        let (x, y) = (q.x, q.y);
        Vector2::new(
            -f * y * ((6.0 * length - 3.0 * x) * x + (2.0 + nu) * (y * y - c * c)),
            f * (3.0 * nu * y * y * (length - x)
                + (4.0 + 5.0 * nu) * c * c * x
                + (3.0 * length - x) * x * x),
        )
    });
    let strain: VoigtField = Arc::new(move |q: Point2<f64>| {
        let (x, y) = (q.x, q.y);
        let bend = p * (length - x) * y / (e * inertia);
        Vector3::new(-bend, nu * bend, p * (1.0 + nu) * (c * c - y * y) / (e * inertia))
    });
    let stress = stress_of(material.c, &strain);
    Benchmark {
        field: AnalyticField {
            label: "cantilever_end_load".into(),
            displacement,
            strain: Some(strain),
            stress: Some(stress),
            body_force: None,
            extra_degree: 0,
        },
        material,
    }
}

/// First manufactured solution: a divergence-free degree-6 polynomial
/// displacement on (0,1)², E_Y = 2.5, ν = 0.25, plane stress, zero body
/// force.
pub fn manufactured_1() -> Benchmark {
    let material = material_matrix(2.5, 0.25, MaterialMode::PlaneStress).unwrap();
    let displacement: VectorField = Arc::new(|p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector2::new(
            -x.powi(6) / 80.0 + 0.5 * x.powi(4) * y * y - (13.0 / 16.0) * x * x * y.powi(4)
                + (3.0 / 40.0) * y.powi(6),
            0.25 * x * y.powi(5) - (5.0 / 12.0) * x.powi(3) * y.powi(3),
        )
    });
    let strain: VoigtField = Arc::new(|p: Point2<f64>| {
        let (x, y) = (p.x, p.y);
        Vector3::new(
            -(3.0 / 40.0) * x.powi(5) + 2.0 * x.powi(3) * y * y - (13.0 / 8.0) * x * y.powi(4),
            1.25 * x * y.powi(4) - 1.25 * x.powi(3) * y * y,
            x.powi(4) * y - 4.5 * x * x * y.powi(3) + 0.7 * y.powi(5),
        )
    });
    let stress = stress_of(material.c, &strain);
    Benchmark {
        field: AnalyticField {
            label: "manufactured_1".into(),
            displacement,
            strain: Some(strain),
            stress: Some(stress),
            body_force: None,
            // Degree-6 displacement: raise the error quadrature so the
            // L² defect integrand is still integrated exactly.
            extra_degree: 6,
        },
        material,
    }
}

/// Second manufactured solution: the trigonometric displacement
/// (x sin πx sin πy, y sin πx sin πy) on (0,1)², E_Y = 2.5, ν = 0.25,
/// plane stress, with its equilibrating body force.
pub fn manufactured_2() -> Benchmark {
    let material = material_matrix(2.5, 0.25, MaterialMode::PlaneStress).unwrap();
    let displacement: VectorField = Arc::new(|p: Point2<f64>| {
        let s = (PI * p.x).sin() * (PI * p.y).sin();
        Vector2::new(p.x * s, p.y * s)
    });
    let strain: VoigtField = Arc::new(|p: Point2<f64>| {
        let (sx, cx) = (PI * p.x).sin_cos();
        let (sy, cy) = (PI * p.y).sin_cos();
        Vector3::new(
            sx * sy + PI * p.x * cx * sy,
            sx * sy + PI * p.y * sx * cy,
            PI * p.x * sx * cy + PI * p.y * cx * sy,
        )
    });
    let stress = stress_of(material.c, &strain);
    let body_force: VectorField = Arc::new(|p: Point2<f64>| {
        let (sx, cx) = (PI * p.x).sin_cos();
        let (sy, cy) = (PI * p.y).sin_cos();
        let pp = PI * PI;
        Vector2::new(
            (11.0 / 3.0) * pp * p.x * sx * sy - (5.0 / 3.0) * pp * p.y * cx * cy
                - 7.0 * PI * cx * sy,
            (11.0 / 3.0) * pp * p.y * sx * sy - (5.0 / 3.0) * pp * p.x * cx * cy
                - 7.0 * PI * cy * sx,
        )
    });
    Benchmark {
        field: AnalyticField {
            label: "manufactured_2".into(),
            displacement,
            strain: Some(strain),
            stress: Some(stress),
            body_force: Some(body_force),
            extra_degree: 2,
        },
        material,
    }
}

/// Airy-series solution for a simply supported beam (0,8) × (−1/2, 1/2)
/// under the sinusoidal top load σ_yy = p₀ sin(βx), β = π/L, with
/// traction-free bottom face (E_Y = 2×10⁵, ν = 0.3, plane stress).
///
/// The four series constants are determined by the σ_yy and σ_xy
/// amplitude conditions on the two horizontal faces; [`Self::traction_residual`]
/// measures how well they are satisfied.
#[derive(Debug, Clone)]
pub struct BeamSolution {
    pub material: MaterialMatrix,
    pub length: f64,
    pub half_depth: f64,
    /// Load amplitude p₀ of σ_yy = p₀ sin(βx) on the top face.
    pub p0: f64,
    pub beta: f64,
    /// Constants (A, B, C, D) of the hyperbolic Airy profile.
    pub constants: Vector4<f64>,
    compliance: Matrix3<f64>,
}

fn syy_row(beta: f64, y: f64) -> RowVector4<f64> {
    let (sh, ch) = ((beta * y).sinh(), (beta * y).cosh());
    let b2 = beta * beta;
    RowVector4::new(-b2 * sh, -b2 * ch, -b2 * beta * y * sh, -b2 * beta * y * ch)
}

fn sxy_row(beta: f64, y: f64) -> RowVector4<f64> {
    let (sh, ch) = ((beta * y).sinh(), (beta * y).cosh());
    let b2 = beta * beta;
    RowVector4::new(
        -b2 * ch,
        -b2 * sh,
        -b2 * (beta * y * ch + sh),
        -b2 * (beta * y * sh + ch),
    )
}

impl BeamSolution {
    pub fn new() -> Self {
        let material = material_matrix(2.0e5, 0.3, MaterialMode::PlaneStress).unwrap();
        let (length, half_depth, p0) = (8.0, 0.5, -100.0);
        let beta = PI / length;
        let d = half_depth;
        let m = Matrix4::from_rows(&[
            syy_row(beta, d),
            syy_row(beta, -d),
            sxy_row(beta, d),
            sxy_row(beta, -d),
        ]);
        let rhs = Vector4::new(p0, 0.0, 0.0, 0.0);
        let constants = m.lu().solve(&rhs).expect("face-traction system is nonsingular");
        let compliance = material.c.try_inverse().expect("material matrix invertible");
        Self {
            material,
            length,
            half_depth,
            p0,
            beta,
            constants,
            compliance,
        }
    }

    pub fn stress(&self, p: Point2<f64>) -> Vector3<f64> {
        let (a, b, c, d) = (
            self.constants[0],
            self.constants[1],
            self.constants[2],
            self.constants[3],
        );
        let beta = self.beta;
        let by = beta * p.y;
        let (sh, ch) = (by.sinh(), by.cosh());
        let (sx, cx) = (beta * p.x).sin_cos();
        let b2 = beta * beta;
        let sxx = b2 * sx * (a * sh + b * ch + c * (by * sh + 2.0 * ch) + d * (by * ch + 2.0 * sh));
        let syy = -b2 * sx * (a * sh + b * ch + c * by * sh + d * by * ch);
        let sxy = -b2 * cx * (a * ch + b * sh + c * (by * ch + sh) + d * (by * sh + ch));
        Vector3::new(sxx, syy, sxy)
    }

    pub fn displacement(&self, p: Point2<f64>) -> Vector2<f64> {
        let (a, b, c, d) = (
            self.constants[0],
            self.constants[1],
            self.constants[2],
            self.constants[3],
        );
        let (e, nu) = (self.material.e_y, self.material.nu);
        let beta = self.beta;
        let by = beta * p.y;
        let (sh, ch) = (by.sinh(), by.cosh());
        let (sx, cx) = (beta * p.x).sin_cos();
        let onu = 1.0 + nu;
        let u = -(beta / e)
            * cx
            * (a * onu * sh + b * onu * ch + c * (onu * by * sh + 2.0 * ch)
                + d * (onu * by * ch + 2.0 * sh));
        let v = -(beta / e)
            * sx
            * (a * onu * ch + b * onu * sh + c * (onu * by * ch - (1.0 - nu) * sh)
                + d * (onu * by * sh - (1.0 - nu) * ch));
        Vector2::new(u, v)
    }

    /// Maximum traction mismatch on the two horizontal faces over a dense
    /// sample of x: |σ_yy − p₀ sin βx| and |σ_xy| on top, |σ_yy| and
    /// |σ_xy| on bottom.
    pub fn traction_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let n = 65;
        for i in 0..=n {
            let x = self.length * i as f64 / n as f64;
            let top = self.stress(Point2::new(x, self.half_depth));
            let bottom = self.stress(Point2::new(x, -self.half_depth));
            let load = self.p0 * (self.beta * x).sin();
            worst = worst
                .max((top[1] - load).abs())
                .max(top[2].abs())
                .max(bottom[1].abs())
                .max(bottom[2].abs());
        }
        worst
    }

    pub fn benchmark(&self) -> Benchmark {
        let s = self.clone();
        let displacement: VectorField = Arc::new(move |p| s.displacement(p));
        let s = self.clone();
        let strain: VoigtField = Arc::new(move |p| s.compliance * s.stress(p));
        let s = self.clone();
        let stress: VoigtField = Arc::new(move |p| s.stress(p));
        Benchmark {
            field: AnalyticField {
                label: "beam_sinusoidal_load".into(),
                displacement,
                strain: Some(strain),
                stress: Some(stress),
                body_force: None,
                extra_degree: 2,
            },
            material: self.material.clone(),
        }
    }
}

impl Default for BeamSolution {
    fn default() -> Self {
        Self::new()
    }
}

/// Uniaxial-tension solution for an infinite plate with a traction-free
/// circular hole (radius a = 1, far-field σ₀ = 1 in x), restricted to the
/// quarter plate (0,5)²; E_Y = 2×10⁵, ν = 0.3, plane strain.
#[derive(Debug, Clone)]
pub struct KirschPlate {
    pub material: MaterialMatrix,
    pub radius: f64,
    pub sigma0: f64,
    mu: f64,
    kappa: f64,
    compliance: Matrix3<f64>,
}

impl KirschPlate {
    pub fn new() -> Self {
        let material = material_matrix(2.0e5, 0.3, MaterialMode::PlaneStrain).unwrap();
        let mu = material.e_y / (2.0 * (1.0 + material.nu));
        let kappa = 3.0 - 4.0 * material.nu;
        let compliance = material.c.try_inverse().expect("material matrix invertible");
        Self {
            material,
            radius: 1.0,
            sigma0: 1.0,
            mu,
            kappa,
            compliance,
        }
    }

    pub fn stress(&self, p: Point2<f64>) -> Vector3<f64> {
        let (a, s0) = (self.radius, self.sigma0);
        let r2 = p.x * p.x + p.y * p.y;
        let theta = p.y.atan2(p.x);
        let q2 = a * a / r2;
        let q4 = q2 * q2;
        let (s2, c2) = (2.0 * theta).sin_cos();
        let (s4, c4) = (4.0 * theta).sin_cos();
        Vector3::new(
            s0 * (1.0 - q2 * (1.5 * c2 + c4) + 1.5 * q4 * c4),
            s0 * (-q2 * (0.5 * c2 - c4) - 1.5 * q4 * c4),
            s0 * (-q2 * (0.5 * s2 + s4) + 1.5 * q4 * s4),
        )
    }

    pub fn displacement(&self, p: Point2<f64>) -> Vector2<f64> {
        let (a, s0) = (self.radius, self.sigma0);
        let r = (p.x * p.x + p.y * p.y).sqrt();
        let theta = p.y.atan2(p.x);
        let k = self.kappa;
        let f = s0 * a / (8.0 * self.mu);
        let (q, w) = (r / a, a / r);
        let w3 = w * w * w;
        let (s1, c1) = theta.sin_cos();
        let (s3, c3) = (3.0 * theta).sin_cos();
        Vector2::new(
            f * (q * (k + 1.0) * c1 + 2.0 * w * ((1.0 + k) * c1 + c3) - 2.0 * w3 * c3),
            f * (q * (k - 3.0) * s1 + 2.0 * w * ((1.0 - k) * s1 + s3) - 2.0 * w3 * s3),
        )
    }

    /// Maximum of |σ_rr| and |σ_rθ| on the hole boundary over a dense
    /// angular sample, relative to σ₀.
    pub fn hole_traction_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let n = 65;
        for i in 0..=n {
            let theta = FRAC_PI_2 * i as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            let x = Point2::new(self.radius * c, self.radius * s);
            let sig = self.stress(x);
            let srr = sig[0] * c * c + sig[1] * s * s + 2.0 * sig[2] * s * c;
            let srt = (sig[1] - sig[0]) * s * c + sig[2] * (c * c - s * s);
            worst = worst.max(srr.abs()).max(srt.abs());
        }
        worst / self.sigma0
    }

    pub fn benchmark(&self) -> Benchmark {
        let s = self.clone();
        let displacement: VectorField = Arc::new(move |p| s.displacement(p));
        let s = self.clone();
        let strain: VoigtField = Arc::new(move |p| s.compliance * s.stress(p));
        let s = self.clone();
        let stress: VoigtField = Arc::new(move |p| s.stress(p));
        Benchmark {
            field: AnalyticField {
                label: "plate_hole".into(),
                displacement,
                strain: Some(strain),
                stress: Some(stress),
                body_force: None,
                extra_degree: 2,
            },
            material: self.material.clone(),
        }
    }
}

impl Default for KirschPlate {
    fn default() -> Self {
        Self::new()
    }
}

/// Structured quadrilateral mesh of the quarter plate (0,5)² minus the
/// quarter disc of radius 1: a transfinite blend between the hole arc and
/// the outer square corner path, with `n_r` radial and `n_theta` angular
/// cells. The radial spacing is graded geometrically so the first layer
/// matches the hole chord length and the near-hole cells are isotropic.
/// `n_theta` must be even so the outer corner (5,5) is a mesh vertex.
/// Boundary groups: `hole`, `bottom` (y = 0), `left` (x = 0), `right`
/// (x = 5), `top` (y = 5).
pub fn plate_quarter_mesh(n_r: usize, n_theta: usize) -> Result<PolygonalMesh, StudyError> {
    if n_r < 1 || n_theta < 2 || n_theta % 2 != 0 {
        return Err(StudyError::Configuration(format!(
            "plate mesh needs n_r >= 1 and even n_theta >= 2, got ({n_r}, {n_theta})"
        )));
    }
    let (a, l) = (1.0f64, 5.0f64);
    // Outer path from (l, 0) up to the corner (l, l), then across to (0, l),
    // parametrized by arclength fraction t ∈ [0, 1].
    let outer = |t: f64| {
        if t <= 0.5 {
            Point2::new(l, 2.0 * t * l)
        } else {
            Point2::new(l - 2.0 * (t - 0.5) * l, l)
        }
    };
    // Graded radial blend g(ρ) = (e^{αρ} − 1)/(e^α − 1): α is chosen so the
    // first layer on the shortest ray (length l − a at θ = 0) equals the
    // hole chord; α = 0 degenerates to the uniform blend.
    let chord = 2.0 * a * (FRAC_PI_2 / n_theta as f64 / 2.0).sin();
    let target = (chord / (l - a)).min(1.0 / n_r as f64);
    let first_layer = |alpha: f64| ((alpha / n_r as f64).exp() - 1.0) / (alpha.exp() - 1.0);
    let alpha = if target + 1e-12 >= 1.0 / n_r as f64 {
        0.0
    } else {
        let (mut lo, mut hi) = (1e-9, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if first_layer(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let grade = move |rho: f64| {
        if alpha == 0.0 {
            rho
        } else {
            ((alpha * rho).exp() - 1.0) / (alpha.exp() - 1.0)
        }
    };
    let mut vertices = Vec::with_capacity((n_r + 1) * (n_theta + 1));
    for i in 0..=n_r {
        let g = grade(i as f64 / n_r as f64);
        for j in 0..=n_theta {
            let t = j as f64 / n_theta as f64;
            // Snap the symmetry rays so boundary vertices land exactly on
            // the coordinate axes.
            let arc = if j == 0 {
                Point2::new(a, 0.0)
            } else if j == n_theta {
                Point2::new(0.0, a)
            } else {
                let (s, c) = (FRAC_PI_2 * t).sin_cos();
                Point2::new(a * c, a * s)
            };
            let out = outer(t);
            vertices.push(arc + g * (out - arc));
        }
    }
    let idx = |i: usize, j: usize| i * (n_theta + 1) + j;
    let mut cells = Vec::with_capacity(n_r * n_theta);
    let mut boundary_edges = Vec::new();
    for i in 0..n_r {
        for j in 0..n_theta {
            let cell = cells.len();
            cells.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            if j == 0 {
                boundary_edges.push(BoundaryEdge {
                    cell,
                    local_edge: 0,
                    group: "bottom".into(),
                });
            }
            if i + 1 == n_r {
                let group = if j < n_theta / 2 { "right" } else { "top" };
                boundary_edges.push(BoundaryEdge {
                    cell,
                    local_edge: 1,
                    group: group.into(),
                });
            }
            if j + 1 == n_theta {
                boundary_edges.push(BoundaryEdge {
                    cell,
                    local_edge: 2,
                    group: "left".into(),
                });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge {
                    cell,
                    local_edge: 3,
                    group: "hole".into(),
                });
            }
        }
    }
    let mesh = PolygonalMesh {
        vertices,
        cells,
        boundary_edges,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// All boundary groups of a mesh, deduplicated.
fn mesh_groups(mesh: &PolygonalMesh) -> Vec<String> {
    let mut groups: Vec<String> = mesh
        .boundary_edges
        .iter()
        .map(|b| b.group.clone())
        .collect();
    groups.sort_unstable();
    groups.dedup();
    groups
}

fn dirichlet_everywhere(
    mesh: &PolygonalMesh,
    field: &AnalyticField,
) -> BTreeMap<String, BoundaryCondition> {
    mesh_groups(mesh)
        .into_iter()
        .map(|g| (g, BoundaryCondition::Dirichlet(field.displacement.clone())))
        .collect()
}

/// Dirichlet on the left edge, exact tractions on the other three box
/// edges (for bar domains whose groups are left/right/bottom/top).
fn bar_mixed_conditions(field: &AnalyticField) -> BTreeMap<String, BoundaryCondition> {
    let mut conditions = BTreeMap::new();
    conditions.insert(
        "left".into(),
        BoundaryCondition::Dirichlet(field.displacement.clone()),
    );
    conditions.insert(
        "right".into(),
        BoundaryCondition::Neumann(traction_on(field, Vector2::new(1.0, 0.0))),
    );
    conditions.insert(
        "top".into(),
        BoundaryCondition::Neumann(traction_on(field, Vector2::new(0.0, 1.0))),
    );
    conditions.insert(
        "bottom".into(),
        BoundaryCondition::Neumann(traction_on(field, Vector2::new(0.0, -1.0))),
    );
    conditions
}

const BAR_LO: Point2<f64> = Point2::new(0.0, -0.5);
const BAR_HI: Point2<f64> = Point2::new(8.0, 0.5);

fn voronoi_box(
    n_seeds: usize,
    lloyd_iters: usize,
    lo: Point2<f64>,
    hi: Point2<f64>,
    k: usize,
) -> VoronoiParams {
    VoronoiParams {
        n_seeds,
        lloyd_iters,
        lo,
        hi,
        // Triangles have too few edges for the cubic serendipity space.
        min_cell_vertices: if k >= 3 { 4 } else { 3 },
    }
}

/// One row of a patch-test table.
#[derive(Debug, Clone)]
pub struct PatchRow {
    pub mesh_label: &'static str,
    pub n_elems: usize,
    pub errors: ErrorMeasures,
}

#[derive(Debug, Clone)]
pub struct PatchReport {
    pub k: usize,
    pub equilibrium: bool,
    pub rows: Vec<PatchRow>,
}

impl PatchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mesh,n_elems,linf,l2,energy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e}",
                r.mesh_label, r.n_elems, r.errors.linf, r.errors.l2, r.errors.energy
            );
        }
        out
    }

    /// Largest of the three error measures over all rows.
    pub fn worst_error(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.errors.linf, r.errors.l2, r.errors.energy])
            .fold(0.0, f64::max)
    }
}

/// Runs the order-k patch test. With `equilibrium = false` the polynomial
/// displacement patch field of degree k is imposed as Dirichlet data on
/// the whole boundary of (0,1)² over four 16-element meshes (uniform,
/// random Voronoi, Lloyd-smoothed Voronoi, nonconvex). With
/// `equilibrium = true` the degree-k equilibrium field on the bar
/// (0,8) × (−1/2, 1/2) is imposed as Dirichlet data on x = 0 and exact
/// tractions elsewhere, over three 16-element meshes.
pub fn run_patch_tests(k: usize, equilibrium: bool, seed: u64) -> Result<PatchReport, StudyError> {
    assert!(k == 2 || k == 3, "patch tests are defined for k = 2, 3");
    let bench = match (k, equilibrium) {
        (2, false) => quadratic_patch(),
        (3, false) => cubic_patch(),
        (2, true) => quadratic_equilibrium(),
        (3, true) => cantilever_end_load(),
        _ => unreachable!(),
    };
    let meshes: Vec<(&'static str, PolygonalMesh)> = if equilibrium {
        vec![
            (
                "uniform",
                generate_mesh(
                    &MeshParams::Uniform(GridParams {
                        nx: 8,
                        ny: 2,
                        lo: BAR_LO,
                        hi: BAR_HI,
                    }),
                    seed,
                )?,
            ),
            (
                "random",
                generate_mesh(
                    &MeshParams::VoronoiRandom(voronoi_box(16, 0, BAR_LO, BAR_HI, k)),
                    seed,
                )?,
            ),
            (
                "lloyd",
                generate_mesh(
                    &MeshParams::VoronoiLloyd(voronoi_box(16, 3, BAR_LO, BAR_HI, k)),
                    seed + 1,
                )?,
            ),
        ]
    } else {
        let unit_lo = Point2::new(0.0, 0.0);
        let unit_hi = Point2::new(1.0, 1.0);
        vec![
            (
                "uniform",
                generate_mesh(&MeshParams::Uniform(GridParams::unit(4, 4)), seed)?,
            ),
            (
                "random",
                generate_mesh(
                    &MeshParams::VoronoiRandom(voronoi_box(16, 0, unit_lo, unit_hi, k)),
                    seed,
                )?,
            ),
            (
                "lloyd",
                generate_mesh(
                    &MeshParams::VoronoiLloyd(voronoi_box(16, 3, unit_lo, unit_hi, k)),
                    seed + 1,
                )?,
            ),
            (
                "nonconvex",
                generate_mesh(
                    &MeshParams::NonconvexSplit(NonconvexParams {
                        nx: 4,
                        ny: 2,
                        lo: unit_lo,
                        hi: unit_hi,
                    }),
                    seed,
                )?,
            ),
        ]
    };
    let mut rows = Vec::new();
    for (mesh_label, mesh) in &meshes {
        let conditions = if equilibrium {
            bar_mixed_conditions(&bench.field)
        } else {
            dirichlet_everywhere(mesh, &bench.field)
        };
        let bvp = BoundaryValueProblem {
            mesh,
            k,
            ell_rule: EllRule::SufficientBound,
            material: bench.material.clone(),
            body_force: bench.field.body_force.clone(),
            body_force_extra_degree: bench.field.extra_degree,
            traction_extra_degree: bench.field.extra_degree,
            conditions,
        };
        let (dofmap, solution) = solve_bvp(&bvp)?;
        let errors = error_norms(&bvp, &dofmap, &solution, &bench.field)?;
        rows.push(PatchRow {
            mesh_label,
            n_elems: mesh.n_cells(),
            errors,
        });
    }
    Ok(PatchReport {
        k,
        equilibrium,
        rows,
    })
}

/// The refinement studies with analytic reference solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Manufactured1,
    Manufactured2,
    Beam,
    BeamNonconvex,
    PlateHole,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Manufactured1 => "manufactured1",
            Self::Manufactured2 => "manufactured2",
            Self::Beam => "beam",
            Self::BeamNonconvex => "beam_nonconvex",
            Self::PlateHole => "plate_hole",
        }
    }

    pub const ALL: [StudyKind; 5] = [
        Self::Manufactured1,
        Self::Manufactured2,
        Self::Beam,
        Self::BeamNonconvex,
        Self::PlateHole,
    ];

    fn max_levels(self) -> usize {
        match self {
            Self::Manufactured1 | Self::Manufactured2 | Self::Beam => 4,
            // The split-cell bar superconverges on coarse levels; the extra
            // level is needed before the observed rate settles at the
            // asymptotic one.
            Self::BeamNonconvex => 5,
            Self::PlateHole => 3,
        }
    }

    fn mesh_family(self) -> &'static str {
        match self {
            Self::Manufactured1 | Self::Manufactured2 | Self::Beam => "voronoi_lloyd",
            Self::BeamNonconvex => "nonconvex_split",
            Self::PlateHole => "voronoi_hole",
        }
    }
}

impl FromStr for StudyKind {
    type Err = StudyError;
    fn from_str(s: &str) -> Result<Self, StudyError> {
        StudyKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| {
                StudyError::Configuration(format!(
                    "unknown study '{s}' (expected one of {})",
                    StudyKind::ALL.map(StudyKind::name).join(", ")
                ))
            })
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub n_elems: usize,
    pub n_dofs: usize,
    pub errors: ErrorMeasures,
}

impl LevelRecord {
    /// Mesh-size proxy 1/√(number of DOFs) used on the rate axis.
    pub fn h_proxy(&self) -> f64 {
        1.0 / (self.n_dofs as f64).sqrt()
    }
}

/// A finished convergence study: per-level errors plus the pairwise slopes
/// of the L² and energy errors against √(number of DOFs).
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub study: &'static str,
    pub k: usize,
    /// Mesh family used for the refinement ladder.
    pub family: &'static str,
    pub levels: Vec<LevelRecord>,
    pub rate_l2: Vec<Option<f64>>,
    pub rate_energy: Vec<Option<f64>>,
    pub wall: Duration,
}

fn fmt_rate(rate: &Option<f64>) -> String {
    match rate {
        Some(v) => format!("{v:.17e}"),
        None => String::new(),
    }
}

impl StudyReport {
    /// CSV with one row per level (rate columns empty) followed by one row
    /// per consecutive level pair carrying the slopes; floats use 17
    /// significant digits after the point so parsing recovers them exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,n_elems,n_dofs,linf,l2,energy,rate_l2,rate_energy\n");
        for r in &self.levels {
            let _ = writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e},,",
                r.level, r.n_elems, r.n_dofs, r.errors.linf, r.errors.l2, r.errors.energy
            );
        }
        for (i, (rl, re)) in self.rate_l2.iter().zip(&self.rate_energy).enumerate() {
            let _ = writeln!(
                out,
                "rate_{}_{},,,,,,{},{}",
                i + 1,
                i + 2,
                fmt_rate(rl),
                fmt_rate(re)
            );
        }
        out
    }

    /// Slope of the final level pair.
    pub fn final_rate_l2(&self) -> Option<f64> {
        self.rate_l2.last().copied().flatten()
    }

    pub fn final_rate_energy(&self) -> Option<f64> {
        self.rate_energy.last().copied().flatten()
    }

    /// Least-squares slope of ln(L² error) against ln(h proxy) over the
    /// last three levels (all levels when fewer). Random meshes make the
    /// single final pair noisy; the fit smooths that out.
    pub fn asymptotic_rate_l2(&self) -> Option<f64> {
        self.tail_fit(|r| r.errors.l2)
    }

    /// Same fit for the energy error.
    pub fn asymptotic_rate_energy(&self) -> Option<f64> {
        self.tail_fit(|r| r.errors.energy)
    }

    fn tail_fit(&self, error: impl Fn(&LevelRecord) -> f64) -> Option<f64> {
        let tail = &self.levels[self.levels.len().saturating_sub(3)..];
        if tail.len() < 2 {
            return None;
        }
        let pts: Vec<(f64, f64)> = tail
            .iter()
            .map(|r| (r.h_proxy().ln(), error(r).ln()))
            .collect();
        if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return None;
        }
        let n = pts.len() as f64;
        let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (sxx, sxy): (f64, f64) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
        let denom = n * sxx - sx * sx;
        (denom.abs() > 0.0).then(|| (n * sxy - sx * sy) / denom)
    }
}

fn study_mesh(kind: StudyKind, k: usize, level: usize, seed: u64) -> Result<PolygonalMesh, StudyError> {
    let mesh_seed = seed.wrapping_add(level as u64);
    let mesh = match kind {
        StudyKind::Manufactured1 | StudyKind::Manufactured2 => {
            let seeds = [64, 256, 1024, 4096][level];
            generate_mesh(
                &MeshParams::VoronoiLloyd(voronoi_box(
                    seeds,
                    3,
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 1.0),
                    k,
                )),
                mesh_seed,
            )?
        }
        StudyKind::Beam => {
            let seeds = [150, 1000, 3500, 7000][level];
            generate_mesh(
                &MeshParams::VoronoiLloyd(voronoi_box(seeds, 3, BAR_LO, BAR_HI, k)),
                mesh_seed,
            )?
        }
        StudyKind::BeamNonconvex => {
            let (nx, ny) = [(16, 2), (32, 4), (64, 8), (128, 16), (256, 32)][level];
            generate_mesh(
                &MeshParams::NonconvexSplit(NonconvexParams {
                    nx,
                    ny,
                    lo: BAR_LO,
                    hi: BAR_HI,
                }),
                mesh_seed,
            )?
        }
        StudyKind::PlateHole => {
            let seeds = [250, 1500, 6000][level];
            generate_mesh(
                &MeshParams::VoronoiHole(HoledVoronoiParams {
                    n_seeds: seeds,
                    lloyd_iters: 3,
                    lo: Point2::new(0.0, 0.0),
                    hi: Point2::new(5.0, 5.0),
                    hole_center: Point2::new(0.0, 0.0),
                    hole_radius: 1.0,
                    min_cell_vertices: if k >= 3 { 4 } else { 3 },
                }),
                mesh_seed,
            )?
        }
    };
    Ok(mesh)
}

fn study_benchmark(kind: StudyKind) -> Result<Benchmark, StudyError> {
    match kind {
        StudyKind::Manufactured1 => Ok(manufactured_1()),
        StudyKind::Manufactured2 => Ok(manufactured_2()),
        StudyKind::Beam | StudyKind::BeamNonconvex => {
            let beam = BeamSolution::new();
            let residual = beam.traction_residual();
            if residual > 1e-8 * beam.p0.abs() {
                return Err(StudyError::Configuration(format!(
                    "beam face-traction residual {residual:.3e} exceeds tolerance"
                )));
            }
            Ok(beam.benchmark())
        }
        StudyKind::PlateHole => {
            let plate = KirschPlate::new();
            let residual = plate.hole_traction_residual();
            if residual > 1e-10 {
                return Err(StudyError::Configuration(format!(
                    "hole traction residual {residual:.3e} exceeds tolerance"
                )));
            }
            Ok(plate.benchmark())
        }
    }
}

fn study_conditions(
    kind: StudyKind,
    bench: &Benchmark,
    mesh: &PolygonalMesh,
) -> BTreeMap<String, BoundaryCondition> {
    match kind {
        StudyKind::Manufactured1 | StudyKind::Manufactured2 => {
            dirichlet_everywhere(mesh, &bench.field)
        }
        // Displacement data on the two ends, the sinusoidal load on top and
        // a traction-free bottom face (both via the exact stress).
        StudyKind::Beam | StudyKind::BeamNonconvex => {
            let mut conditions = BTreeMap::new();
            conditions.insert(
                "left".into(),
                BoundaryCondition::Dirichlet(bench.field.displacement.clone()),
            );
            conditions.insert(
                "right".into(),
                BoundaryCondition::Dirichlet(bench.field.displacement.clone()),
            );
            conditions.insert(
                "top".into(),
                BoundaryCondition::Neumann(traction_on(&bench.field, Vector2::new(0.0, 1.0))),
            );
            conditions.insert(
                "bottom".into(),
                BoundaryCondition::Neumann(traction_on(&bench.field, Vector2::new(0.0, -1.0))),
            );
            conditions
        }
        // Symmetry rollers on the coordinate axes, a traction-free hole,
        // and exact tractions on the two outer faces.
        StudyKind::PlateHole => {
            let mut conditions = BTreeMap::new();
            conditions.insert(
                "left".into(),
                BoundaryCondition::DirichletComponent {
                    component: 0,
                    value: Arc::new(|_| 0.0),
                },
            );
            conditions.insert(
                "bottom".into(),
                BoundaryCondition::DirichletComponent {
                    component: 1,
                    value: Arc::new(|_| 0.0),
                },
            );
            conditions.insert(
                "hole".into(),
                BoundaryCondition::Neumann(Arc::new(|_| Vector2::zeros())),
            );
            conditions.insert(
                "right".into(),
                BoundaryCondition::Neumann(traction_on(&bench.field, Vector2::new(1.0, 0.0))),
            );
            conditions.insert(
                "top".into(),
                BoundaryCondition::Neumann(traction_on(&bench.field, Vector2::new(0.0, 1.0))),
            );
            conditions
        }
    }
}

/// Runs `levels` refinement levels of a convergence study for order k and
/// reports errors and pairwise convergence rates.
pub fn run_convergence(
    kind: StudyKind,
    k: usize,
    levels: usize,
    seed: u64,
) -> Result<StudyReport, StudyError> {
    assert!(k == 2 || k == 3, "convergence studies are defined for k = 2, 3");
    if levels < 2 || levels > kind.max_levels() {
        return Err(StudyError::Configuration(format!(
            "study '{}' supports 2..={} levels, got {levels}",
            kind.name(),
            kind.max_levels()
        )));
    }
    let start = Instant::now();
    let bench = study_benchmark(kind)?;
    let mut records = Vec::with_capacity(levels);
    for level in 0..levels {
        let mesh = study_mesh(kind, k, level, seed)?;
        let conditions = study_conditions(kind, &bench, &mesh);
        let bvp = BoundaryValueProblem {
            mesh: &mesh,
            k,
            ell_rule: EllRule::SufficientBound,
            material: bench.material.clone(),
            body_force: bench.field.body_force.clone(),
            body_force_extra_degree: bench.field.extra_degree,
            traction_extra_degree: bench.field.extra_degree,
            conditions,
        };
        let (dofmap, solution) = solve_bvp(&bvp)?;
        let errors = error_norms(&bvp, &dofmap, &solution, &bench.field)?;
        if !(errors.linf.is_finite() && errors.l2.is_finite() && errors.energy.is_finite()) {
            return Err(StudyError::Configuration(format!(
                "level {} produced non-finite errors: {errors:?}",
                level + 1
            )));
        }
        records.push(LevelRecord {
            level: level + 1,
            n_elems: mesh.n_cells(),
            n_dofs: dofmap.n_dofs(),
            errors,
        });
    }
    let dofs: Vec<usize> = records.iter().map(|r| r.n_dofs).collect();
    if !dofs.windows(2).all(|w| w[0] < w[1]) {
        return Err(StudyError::Configuration(format!(
            "refinement levels must strictly increase in DOFs, got {dofs:?}"
        )));
    }
    let l2: Vec<f64> = records.iter().map(|r| r.errors.l2).collect();
    let energy: Vec<f64> = records.iter().map(|r| r.errors.energy).collect();
    let rate_l2 = crate::system::convergence_rate(&l2, &dofs);
    let rate_energy = crate::system::convergence_rate(&energy, &dofs);
    Ok(StudyReport {
        study: kind.name(),
        k,
        family: kind.mesh_family(),
        levels: records,
        rate_l2,
        rate_energy,
        wall: start.elapsed(),
    })
}

/// The three element-spectrum sweep families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenFamily {
    /// Regular n-gons over a range of vertex counts.
    Regular,
    /// A regular n-gon (n = 2ℓ) with one vertex progressively displaced.
    Perturbed,
    /// The fixed 3×3 grid whose central cell gains extra edge vertices.
    Inserted,
}

impl EigenFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Regular => "regular",
            Self::Perturbed => "perturbed",
            Self::Inserted => "inserted",
        }
    }
}

impl FromStr for EigenFamily {
    type Err = StudyError;
    fn from_str(s: &str) -> Result<Self, StudyError> {
        match s {
            "regular" => Ok(Self::Regular),
            "perturbed" => Ok(Self::Perturbed),
            "inserted" => Ok(Self::Inserted),
            other => Err(StudyError::Configuration(format!(
                "unknown eigen family '{other}' (expected regular, perturbed or inserted)"
            ))),
        }
    }
}

/// Runs one element-spectrum sweep. `nmax` bounds the vertex count for the
/// regular family and the central-cell node count for the inserted family;
/// the perturbed family always uses the standard perturbation magnitudes
/// on the 2ℓ-gon.
pub fn run_eigen_study(
    family: EigenFamily,
    k: usize,
    ell: usize,
    nmax: usize,
    material: &MaterialMatrix,
) -> Result<Vec<SpectrumReport>, StudyError> {
    match family {
        EigenFamily::Regular => {
            let lo = if k == 3 { 4 } else { 3 };
            if nmax < lo {
                return Err(StudyError::Configuration(format!(
                    "regular sweep needs nmax >= {lo} for k = {k}"
                )));
            }
            Ok(sweep_regular(k, ell, lo..=nmax, material)?)
        }
        EigenFamily::Perturbed => {
            let sweep = sweep_perturbed(k, ell, 2 * ell, &PERTURBATION_DELTAS, material);
            if let Some((delta, message)) = sweep.failures.first() {
                return Err(StudyError::Configuration(format!(
                    "perturbation delta {delta} produced a degenerate polygon: {message}"
                )));
            }
            Ok(sweep.reports)
        }
        EigenFamily::Inserted => {
            if nmax < 4 {
                return Err(StudyError::Configuration(
                    "inserted-node sweep needs nmax >= 4".into(),
                ));
            }
            Ok(sweep_inserted_nodes(k, ell, nmax, material)?)
        }
    }
}
