//! Every governed parameter: name, kind, unit, validator.

use super::ParamValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Number,
    List,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// `lo ≤ v ≤ hi` (or strict where flagged). `label` names the quantity in messages.
    Range {
        lo: f64,
        hi: f64,
        lo_open: bool,
        hi_open: bool,
        label: &'static str,
    },
    /// Integer in `[lo, hi]`.
    Int {
        lo: i64,
        hi: i64,
    },
    /// Non-empty, positive and strictly increasing.
    Increasing,
    /// Non-empty, non-negative, summing to 1.
    Weights,
    /// Exactly `n` finite numbers.
    Len(usize),
    /// Empty, or `[minx, miny, maxx, maxy]` with positive extent.
    OptionalBbox,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub unit: &'static str,
    pub check: Check,
    pub help: &'static str,
}

const fn closed(lo: f64, hi: f64, label: &'static str) -> Check {
    Check::Range {
        lo,
        hi,
        lo_open: false,
        hi_open: false,
        label,
    }
}

const fn positive(label: &'static str) -> Check {
    Check::Range {
        lo: 0.0,
        hi: f64::INFINITY,
        lo_open: true,
        hi_open: false,
        label,
    }
}

const fn nonneg(label: &'static str) -> Check {
    closed(0.0, f64::INFINITY, label)
}

const EMISSIVITY: Check = Check::Range {
    lo: 0.0,
    hi: 1.0,
    lo_open: true,
    hi_open: false,
    label: "emissivity",
};

macro_rules! p {
    ($key:literal, $kind:ident, $unit:literal, $check:expr, $help:literal) => {
        ParamSpec {
            key: $key,
            kind: Kind::$kind,
            unit: $unit,
            check: $check,
            help: $help,
        }
    };
}

pub const REGISTRY: &[ParamSpec] = &[
    // Representative-hour weather.
    p!(
        "air_temperature",
        Number,
        "°C",
        closed(-90.0, 60.0, "air temperature"),
        "2 m air temperature"
    ),
    p!(
        "relative_humidity",
        Number,
        "%",
        closed(0.0, 100.0, "rh"),
        "2 m relative humidity"
    ),
    p!(
        "wind_speed",
        Number,
        "m/s",
        closed(0.0, 75.0, "wind speed"),
        "10 m wind speed"
    ),
    p!(
        "wind_direction",
        Number,
        "deg",
        Check::Range {
            lo: 0.0,
            hi: 360.0,
            lo_open: false,
            hi_open: true,
            label: "wind direction"
        },
        "10 m wind direction, meteorological (from), clockwise from north"
    ),
    p!(
        "ghi",
        Number,
        "W/m2",
        closed(0.0, 1500.0, "irradiance"),
        "global horizontal irradiance"
    ),
    p!(
        "dni",
        Number,
        "W/m2",
        closed(0.0, 1500.0, "irradiance"),
        "direct normal irradiance"
    ),
    p!(
        "dhi",
        Number,
        "W/m2",
        closed(0.0, 1500.0, "irradiance"),
        "diffuse horizontal irradiance"
    ),
    // Site and time.
    p!(
        "latitude",
        Number,
        "deg",
        closed(-90.0, 90.0, "latitude"),
        "site latitude"
    ),
    p!(
        "longitude",
        Number,
        "deg",
        closed(-180.0, 180.0, "longitude"),
        "site longitude"
    ),
    p!(
        "altitude",
        Number,
        "m",
        closed(-500.0, 9000.0, "altitude"),
        "site altitude"
    ),
    p!(
        "utc_offset",
        Number,
        "h",
        closed(-14.0, 14.0, "utc offset"),
        "standard-time offset from UTC"
    ),
    p!("month", Number, "", Check::Int { lo: 1, hi: 12 }, "simulation month"),
    p!(
        "day",
        Number,
        "",
        Check::Int { lo: 1, hi: 31 },
        "simulation day of month"
    ),
    p!(
        "hour",
        Number,
        "",
        Check::Int { lo: 1, hi: 24 },
        "representative EPW hour (1-24, hour ending)"
    ),
    // Domain and mesh.
    p!("cell_size", Number, "m", positive("cell_size"), "plan grid resolution"),
    p!(
        "ground_buffer_factor",
        Number,
        "",
        closed(1.0, 100.0, "buffer factor"),
        "ground plane extent as a multiple of the building bbox"
    ),
    p!(
        "domain_bbox",
        List,
        "m",
        Check::OptionalBbox,
        "explicit plan domain [minx, miny, maxx, maxy]; empty for automatic"
    ),
    p!(
        "weld_tolerance",
        Number,
        "m",
        nonneg("weld tolerance"),
        "vertex weld distance"
    ),
    p!(
        "face_max_edge",
        Number,
        "m",
        positive("face_max_edge"),
        "building faces are subdivided to this edge length for radiation"
    ),
    // Wind.
    p!(
        "slice_heights",
        List,
        "m",
        Check::Increasing,
        "heights of the 2D flow slices"
    ),
    p!(
        "z0",
        Number,
        "m",
        Check::Range {
            lo: 0.0,
            hi: 10.0,
            lo_open: true,
            hi_open: true,
            label: "z0"
        },
        "aerodynamic roughness length"
    ),
    p!(
        "wind_solver",
        Text,
        "",
        Check::Choice(&["sor", "cg"]),
        "linear solver for the potential"
    ),
    p!(
        "sor_omega",
        Number,
        "",
        Check::Range {
            lo: 0.0,
            hi: 2.0,
            lo_open: true,
            hi_open: true,
            label: "relaxation factor"
        },
        "SOR relaxation factor"
    ),
    p!(
        "solver_tolerance",
        Number,
        "",
        positive("solver tolerance"),
        "relative convergence tolerance"
    ),
    p!(
        "solver_max_iters",
        Number,
        "",
        Check::Int { lo: 1, hi: 10_000_000 },
        "iteration cap for the flow solver"
    ),
    p!(
        "k_mix",
        Number,
        "K s/m",
        nonneg("k_mix"),
        "air-temperature surrogate gain"
    ),
    p!(
        "dt_max",
        Number,
        "K",
        nonneg("dt_max"),
        "clamp on the air-temperature adjustment"
    ),
    // Surfaces.
    p!(
        "roof_albedo",
        Number,
        "",
        closed(0.0, 1.0, "albedo"),
        "roof shortwave albedo"
    ),
    p!(
        "wall_albedo",
        Number,
        "",
        closed(0.0, 1.0, "albedo"),
        "wall shortwave albedo"
    ),
    p!(
        "ground_albedo",
        Number,
        "",
        closed(0.0, 1.0, "albedo"),
        "ground shortwave albedo"
    ),
    p!("roof_emissivity", Number, "", EMISSIVITY, "roof longwave emissivity"),
    p!("wall_emissivity", Number, "", EMISSIVITY, "wall longwave emissivity"),
    p!(
        "ground_emissivity",
        Number,
        "",
        EMISSIVITY,
        "ground longwave emissivity"
    ),
    p!(
        "roof_heat_capacity",
        Number,
        "J/m3K",
        positive("heat capacity"),
        "roof volumetric heat capacity"
    ),
    p!(
        "wall_heat_capacity",
        Number,
        "J/m3K",
        positive("heat capacity"),
        "wall volumetric heat capacity"
    ),
    p!(
        "ground_heat_capacity",
        Number,
        "J/m3K",
        positive("heat capacity"),
        "ground volumetric heat capacity"
    ),
    p!(
        "thermal_thickness",
        Number,
        "m",
        positive("thermal thickness"),
        "effective thickness converting volumetric to areal heat capacity"
    ),
    p!(
        "roof_u_value",
        Number,
        "W/m2K",
        positive("U-value"),
        "roof thermal transmittance"
    ),
    p!(
        "wall_u_value",
        Number,
        "W/m2K",
        positive("U-value"),
        "wall thermal transmittance"
    ),
    // Radiation and time stepping.
    p!(
        "sky_emissivity",
        Number,
        "",
        EMISSIVITY,
        "clear-sky effective emissivity"
    ),
    p!(
        "h_conv_a",
        Number,
        "W/m2K",
        nonneg("h_conv_a"),
        "convective coefficient intercept"
    ),
    p!(
        "h_conv_b",
        Number,
        "J/m3K",
        nonneg("h_conv_b"),
        "convective coefficient slope in wind speed"
    ),
    p!(
        "substep_seconds",
        Number,
        "s",
        Check::Range {
            lo: 0.0,
            hi: 3600.0,
            lo_open: true,
            hi_open: false,
            label: "dt"
        },
        "surface-temperature substep"
    ),
    p!(
        "spinup_days",
        Number,
        "",
        Check::Int { lo: 0, hi: 30 },
        "repeat days run before the recorded day"
    ),
    p!(
        "svf_samples",
        Number,
        "",
        Check::Int { lo: 16, hi: 1_000_000 },
        "hemisphere rays per face or point"
    ),
    p!(
        "seed",
        Number,
        "",
        Check::Int {
            lo: 0,
            hi: 9_007_199_254_740_991
        },
        "random seed for ray sampling"
    ),
    p!(
        "erbs_kt_low",
        Number,
        "",
        closed(0.0, 1.0, "clearness index"),
        "upper bound of the overcast branch"
    ),
    p!(
        "erbs_kt_high",
        Number,
        "",
        closed(0.0, 1.0, "clearness index"),
        "lower bound of the clear branch"
    ),
    p!(
        "erbs_low_coeffs",
        List,
        "",
        Check::Len(2),
        "overcast branch kd = c0 + c1 kt"
    ),
    p!(
        "erbs_mid_coeffs",
        List,
        "",
        Check::Len(5),
        "middle branch quartic coefficients, ascending"
    ),
    p!(
        "erbs_high_kd",
        Number,
        "",
        closed(0.0, 1.0, "diffuse fraction"),
        "clear branch diffuse fraction"
    ),
    // Pedestrian and person.
    p!(
        "pedestrian_height",
        Number,
        "m",
        positive("pedestrian height"),
        "height of comfort sample points"
    ),
    p!(
        "alpha_sw",
        Number,
        "",
        closed(0.0, 1.0, "absorptivity"),
        "body shortwave absorptivity"
    ),
    p!(
        "alpha_lw",
        Number,
        "",
        Check::Range {
            lo: 0.0,
            hi: 1.0,
            lo_open: true,
            hi_open: false,
            label: "absorptivity"
        },
        "body longwave absorptivity"
    ),
    p!(
        "f_p",
        Number,
        "",
        closed(0.0, 1.0, "projected area factor"),
        "projected area factor for the direct beam"
    ),
    p!("person_age", Number, "yr", positive("age"), "reference person age"),
    p!(
        "person_height",
        Number,
        "m",
        positive("height"),
        "reference person height"
    ),
    p!(
        "person_weight",
        Number,
        "kg",
        positive("weight"),
        "reference person weight"
    ),
    p!(
        "person_sex",
        Text,
        "",
        Check::Choice(&["male", "female"]),
        "reference person sex"
    ),
    p!(
        "person_work",
        Number,
        "W",
        nonneg("work"),
        "metabolic activity above basal"
    ),
    p!("person_clo", Number, "clo", positive("clo"), "clothing insulation"),
    // Energy.
    p!(
        "setpoint",
        Number,
        "°C",
        closed(10.0, 35.0, "setpoint"),
        "indoor cooling setpoint"
    ),
    p!(
        "ctf_weights",
        List,
        "",
        Check::Weights,
        "response weights on T_surf(h), T_surf(h-1), ..."
    ),
    // Hotspots and mitigation.
    p!(
        "hotspot_count",
        Number,
        "",
        Check::Int { lo: 1, hi: 10_000 },
        "hotspots reported"
    ),
    p!(
        "low_wind_threshold",
        Number,
        "m/s",
        nonneg("threshold"),
        "cause tag: low wind below this speed"
    ),
    p!(
        "high_svf_threshold",
        Number,
        "",
        closed(0.0, 1.0, "threshold"),
        "cause tag: high svf above this value"
    ),
    p!(
        "reflected_sw_threshold",
        Number,
        "W/m2",
        nonneg("threshold"),
        "cause tag: reflected gain above this flux"
    ),
    p!(
        "outlier_k",
        Number,
        "",
        nonneg("outlier_k"),
        "EUI outlier threshold in standard deviations"
    ),
    p!(
        "top_n",
        Number,
        "",
        Check::Int { lo: 0, hi: 100_000 },
        "mitigation targets by EUI"
    ),
    p!(
        "target_radius",
        Number,
        "m",
        nonneg("radius"),
        "mitigation targets near top hotspots"
    ),
    p!(
        "target_roof_albedo",
        Number,
        "",
        closed(0.0, 1.0, "albedo"),
        "mitigation roof albedo"
    ),
    p!(
        "target_wall_albedo",
        Number,
        "",
        closed(0.0, 1.0, "albedo"),
        "mitigation wall albedo"
    ),
    p!(
        "target_ground_albedo",
        Number,
        "",
        closed(0.0, 1.0, "albedo"),
        "mitigation ground albedo"
    ),
    p!(
        "penalty_threshold",
        Number,
        "°C",
        nonneg("penalty threshold"),
        "mean hotspot PET rise that sets the albedo-penalty flag"
    ),
];

pub fn spec(key: &str) -> Option<&'static ParamSpec> {
    REGISTRY.iter().find(|s| s.key == key)
}

fn fmt_range(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> String {
    let f = |v: f64| {
        if v.is_infinite() {
            if v > 0.0 {
                "inf".to_string()
            } else {
                "-inf".to_string()
            }
        } else {
            format!("{v}")
        }
    };
    format!(
        "{}{},{}{}",
        if lo_open { "(" } else { "[" },
        f(lo),
        f(hi),
        if hi_open { ")" } else { "]" }
    )
}

/// Checks one value against its spec; returns a violation message.
pub fn check_value(spec: &ParamSpec, v: &ParamValue) -> Result<(), String> {
    match (spec.kind, v) {
        (Kind::Number, ParamValue::Number(_))
        | (Kind::List, ParamValue::List(_))
        | (Kind::Text, ParamValue::Text(_)) => {}
        (k, _) => return Err(format!("expected a {k:?} value").to_lowercase()),
    }
    match (spec.check, v) {
        (
            Check::Range {
                lo,
                hi,
                lo_open,
                hi_open,
                label,
            },
            ParamValue::Number(x),
        ) => {
            let ok =
                x.is_finite() && if lo_open { *x > lo } else { *x >= lo } && if hi_open { *x < hi } else { *x <= hi };
            if !ok {
                return Err(format!("{label} out of {}", fmt_range(lo, hi, lo_open, hi_open)));
            }
        }
        (Check::Int { lo, hi }, ParamValue::Number(x)) => {
            if !(x.fract() == 0.0 && *x >= lo as f64 && *x <= hi as f64) {
                return Err(format!("not an integer in [{lo},{hi}]"));
            }
        }
        (Check::Increasing, ParamValue::List(xs)) => {
            if xs.is_empty() {
                return Err("empty list".into());
            }
            if xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err("values must be positive".into());
            }
            if xs.windows(2).any(|w| w[1] <= w[0]) {
                return Err("not strictly increasing".into());
            }
        }
        (Check::Weights, ParamValue::List(xs)) => {
            if xs.is_empty() || xs.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err("weights must be non-empty and non-negative".into());
            }
            if (xs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err("weights must sum to 1".into());
            }
        }
        (Check::Len(n), ParamValue::List(xs)) => {
            if xs.len() != n || xs.iter().any(|x| !x.is_finite()) {
                return Err(format!("expected {n} finite numbers"));
            }
        }
        (Check::OptionalBbox, ParamValue::List(xs)) => {
            if !xs.is_empty() && !(xs.len() == 4 && xs.iter().all(|x| x.is_finite()) && xs[2] > xs[0] && xs[3] > xs[1])
            {
                return Err("expected [] or [minx, miny, maxx, maxy] with positive extent".into());
            }
        }
        (Check::Choice(options), ParamValue::Text(s)) if !options.contains(&s.as_str()) => {
            return Err(format!("expected one of {options:?}"));
        }
        _ => {}
    }
    Ok(())
}
