//! Per-command parameters. Each struct is both the clap flag set and the
//! JSON config schema, so flags and config keys always agree.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

macro_rules! params {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            /// JSON file of parameters; flags override its values
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            /// Output CSV path (standard output when absent)
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub out: Option<PathBuf>,
            /// Master seed
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub seed: Option<u64>,
            /// Worker threads, 0 for all cores
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub threads: Option<usize>,
            $(
                $(#[$fm])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

params!(
    /// Four-arm calibration table
    Calibrate {
        /// Mesh size
        eta: f64,
        /// Inner radii, comma separated
        #[arg(value_delimiter = ',')]
        radii: Vec<f64>,
        /// Samples per radius
        samples: u64,
        /// Calibration cache directory (default: $LDP_CACHE_DIR)
        cache: PathBuf,
    }
);

params!(
    /// Log-correlated field sample
    FieldCmd {
        eta: f64,
        /// Domain as x0,x1,y0,y1
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        /// auto, exact_log or brw
        kernel: String,
        /// BRW depth
        depth: u32,
        /// Length scale of the exact log kernel
        length_scale: f64,
    }
);

params!(
    /// GMC site masses, optionally truncated to moderate points
    Gmc {
        gamma: f64,
        eta: f64,
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        kernel: String,
        depth: u32,
        length_scale: f64,
        /// Moderate-point cutoff C (no truncation when absent)
        cutoff: f64,
        /// Calibration mesh
        cal_eta: f64,
        /// Calibration samples per radius
        cal_samples: u64,
        /// Calibration seed
        cal_seed: u64,
        /// Use the synthetic table r^x instead of a lattice calibration
        alpha4_exponent: f64,
        cache: PathBuf,
    }
);

params!(
    /// Liouville dynamical percolation trajectory
    Simulate {
        gamma: f64,
        eta: f64,
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        /// Quad rectangle as x0,x1,y0,y1 (default: the domain)
        #[arg(value_delimiter = ',')]
        quad: Vec<f64>,
        /// lr or bt
        orientation: String,
        /// Time horizon
        tmax: f64,
        /// Sample times (default: 11 evenly spaced in [0, tmax])
        #[arg(value_delimiter = ',')]
        t_grid: Vec<f64>,
        cutoff: f64,
        kernel: String,
        depth: u32,
        length_scale: f64,
        /// Also write every clock event to this CSV
        events: PathBuf,
        cal_eta: f64,
        cal_samples: u64,
        cal_seed: u64,
        alpha4_exponent: f64,
        cache: PathBuf,
    }
);

params!(
    /// Spectral sample law of a Boolean function
    Spectrum {
        /// maj3, dictator, random or crossing
        function: String,
        /// Number of bits (dictator, random)
        bits: usize,
        /// Dictator bit
        index: usize,
        /// Mesh for crossing
        eta: f64,
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        orientation: String,
    }
);

params!(
    /// Covariance decay of a crossing indicator
    Mixing {
        gamma: f64,
        eta: f64,
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        #[arg(value_delimiter = ',')]
        quad: Vec<f64>,
        orientation: String,
        /// Grid times (default: 13 log-spaced in [0.1, tmax])
        #[arg(value_delimiter = ',')]
        t_grid: Vec<f64>,
        tmax: f64,
        replicas: usize,
        /// annealed or quenched
        mode: String,
        cutoff: f64,
        kernel: String,
        depth: u32,
        length_scale: f64,
        /// Start of the power-law fit window
        fit_tmin: f64,
        cal_eta: f64,
        cal_samples: u64,
        cal_seed: u64,
        alpha4_exponent: f64,
        cache: PathBuf,
    }
);

params!(
    /// Flip probability of a crossing across meshes
    Frozen {
        gamma: f64,
        /// Meshes, coarse to fine
        #[arg(value_delimiter = ',')]
        etas: Vec<f64>,
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        #[arg(value_delimiter = ',')]
        quad: Vec<f64>,
        orientation: String,
        /// Observation time
        t: f64,
        replicas: usize,
        cal_eta: f64,
        cal_samples: u64,
        cal_seed: u64,
        alpha4_exponent: f64,
        cache: PathBuf,
    }
);

params!(
    /// Crossing switch counts against the pivotal prediction
    Switchcheck {
        gamma: f64,
        eta: f64,
        #[arg(value_delimiter = ',')]
        domain: Vec<f64>,
        #[arg(value_delimiter = ',')]
        quad: Vec<f64>,
        orientation: String,
        t1: f64,
        t2: f64,
        replicas: usize,
        /// exact or mc
        pivotal: String,
        /// Static configurations for mc pivotal estimates
        static_samples: usize,
        kernel: String,
        depth: u32,
        length_scale: f64,
        cal_eta: f64,
        cal_samples: u64,
        cal_seed: u64,
        alpha4_exponent: f64,
        cache: PathBuf,
    }
);

params!(
    /// Regime, Q and central charge for a given gamma
    Regime {
        gamma: f64,
        /// Dimension of the pivotal measure
        d: f64,
    }
);

/// Overlays the explicitly given flags on the config file and decodes the
/// result, rejecting unknown keys and mistyped values.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T, CliError> {
    let mut map = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display()), "check the --config path"))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::usage("config file must hold a JSON object", "wrap the parameters in {...}")),
                Err(e) => return Err(CliError::usage(format!("config is not valid JSON: {e}"), "check the file syntax")),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags).expect("flags serialize") {
        map.extend(given);
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| {
        CliError::usage(format!("bad parameter: {e}"), "run with --help to list the accepted parameters")
    })
}
