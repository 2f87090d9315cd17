//! Orthogonal wavelet filter banks.
//!
//! Scaling (lowpass reconstruction) filters for the Daubechies, Coiflet and
//! Symlet families, copied at full double precision from the standard
//! published tables (PyWavelets 1.8 `rec_lo`), then projected onto the exact
//! double-shift orthonormality constraints in 50-digit arithmetic (the
//! Symlet entries move by at most 3e-12). Table version 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FILTER_TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Db,
    Sym,
    Coif,
}

impl WaveletFamily {
    fn prefix(self) -> &'static str {
        match self {
            WaveletFamily::Db => "db",
            WaveletFamily::Sym => "sym",
            WaveletFamily::Coif => "coif",
        }
    }
}

/// An orthogonal two-channel filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub order: usize,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletSpec {
    /// Look up a wavelet such as `db4`, `sym5` or `coif2`.
    pub fn by_name(name: &str) -> Result<WaveletSpec> {
        let lower = name.trim().to_ascii_lowercase();
        let (family, digits) = if let Some(d) = lower.strip_prefix("coif") {
            (WaveletFamily::Coif, d)
        } else if let Some(d) = lower.strip_prefix("sym") {
            (WaveletFamily::Sym, d)
        } else if let Some(d) = lower.strip_prefix("db") {
            (WaveletFamily::Db, d)
        } else {
            return Err(unknown(name));
        };
        let order: usize = digits.parse().map_err(|_| unknown(name))?;
        let lowpass = table(family, order).ok_or_else(|| unknown(name))?.to_vec();
        Ok(WaveletSpec::from_lowpass(family, order, lowpass))
    }

    /// Build a bank from its scaling filter; the highpass is the quadrature
    /// mirror `g[j] = (-1)^j h[L-1-j]`.
    pub fn from_lowpass(family: WaveletFamily, order: usize, lowpass: Vec<f64>) -> Self {
        let l = lowpass.len();
        let highpass = (0..l)
            .map(|j| {
                let v = lowpass[l - 1 - j];
                if j % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect();
        WaveletSpec {
            family,
            order,
            lowpass,
            highpass,
        }
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.family.prefix(), self.order)
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    /// Every wavelet in the shipped table.
    pub fn all() -> Vec<WaveletSpec> {
        NAMES.iter().map(|n| WaveletSpec::by_name(n).unwrap()).collect()
    }
}

fn unknown(name: &str) -> Error {
    Error::InvalidConfig(format!(
        "unknown wavelet {name:?}; available: {}",
        NAMES.join(", ")
    ))
}

pub const NAMES: [&str; 16] = [
    "db1", "db2", "db3", "db4", "db5", "db6", "db7", "coif1", "coif2", "coif3", "coif4", "coif5",
    "sym2", "sym3", "sym4", "sym5",
];

fn table(family: WaveletFamily, order: usize) -> Option<&'static [f64]> {
    use WaveletFamily::*;
    Some(match (family, order) {
        (Db, 1) => &DB1,
        (Db, 2) => &DB2,
        (Db, 3) => &DB3,
        (Db, 4) => &DB4,
        (Db, 5) => &DB5,
        (Db, 6) => &DB6,
        (Db, 7) => &DB7,
        (Coif, 1) => &COIF1,
        (Coif, 2) => &COIF2,
        (Coif, 3) => &COIF3,
        (Coif, 4) => &COIF4,
        (Coif, 5) => &COIF5,
        (Sym, 2) => &SYM2,
        (Sym, 3) => &SYM3,
        (Sym, 4) => &SYM4,
        (Sym, 5) => &SYM5,
        _ => return None,
    })
}

#[rustfmt::skip]
mod coefficients {
    pub(super) const DB1: [f64; 2] = [
        std::f64::consts::FRAC_1_SQRT_2,
        std::f64::consts::FRAC_1_SQRT_2,
    ];

    pub(super) const DB2: [f64; 4] = [
        0.48296291314453416,
        0.8365163037378079,
        0.2241438680420134,
        -0.12940952255126037,
    ];

    pub(super) const DB3: [f64; 6] = [
        0.33267055295008263,
        0.8068915093110925,
        0.45987750211849154,
        -0.13501102001025458,
        -0.08544127388202667,
        0.03522629188570954,
    ];

    pub(super) const DB4: [f64; 8] = [
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859858,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ];

    pub(super) const DB5: [f64; 10] = [
        0.16010239797419293,
        0.6038292697971896,
        0.7243085284377729,
        0.13842814590132074,
        -0.24229488706638205,
        -0.032244869584638375,
        0.07757149384004572,
        -0.00624149021279827,
        -0.012580751999082004,
        0.0033357252854737725,
    ];

    pub(super) const DB6: [f64; 12] = [
        0.11154074335010947,
        0.49462389039845306,
        0.7511339080210954,
        0.31525035170919763,
        -0.22626469396543983,
        -0.12976686756726194,
        0.09750160558732304,
        0.02752286553030573,
        -0.03158203931748603,
        0.0005538422011615006,
        0.004777257510945508,
        -0.0010773010853084792,
    ];

    pub(super) const DB7: [f64; 14] = [
        0.07785205408500918,
        0.3965393194819173,
        0.7291320908462351,
        0.4697822874051931,
        -0.14390600392856498,
        -0.22403618499387498,
        0.07130921926683026,
        0.08061260915108308,
        -0.03802993693501441,
        -0.01657454163066688,
        0.012550998556099844,
        0.0004295779729213656,
        -0.0018016407040474908,
        0.0003537137999745203,
    ];

    pub(super) const COIF1: [f64; 6] = [
        -0.07273261951252645,
        0.33789766245748176,
        0.8525720202116004,
        0.3848648468648577,
        -0.07273261951252645,
        -0.015655728135791993,
    ];

    pub(super) const COIF2: [f64; 12] = [
        0.016387336463203648,
        -0.041464936786871784,
        -0.0673725547237256,
        0.3861100668227629,
        0.8127236354494135,
        0.4170051844232391,
        -0.07648859907828076,
        -0.0594344186464311,
        0.023680171946847774,
        0.005611434819368836,
        -0.001823208870911033,
        -0.0007205494455203475,
    ];

    pub(super) const COIF3: [f64; 18] = [
        -0.0037935128643807985,
        0.007782596425672741,
        0.02345269614207717,
        -0.06577191128146936,
        -0.061123390002972545,
        0.40517690240911824,
        0.7937772226260872,
        0.42848347637737,
        -0.07179982161915484,
        -0.08230192710629983,
        0.03455502757329774,
        0.015880544863669445,
        -0.009007976136730622,
        -0.0025745176881367972,
        0.0011175187708306296,
        0.0004662169598204026,
        -7.098330250637891e-05,
        -3.459977319727272e-05,
    ];

    pub(super) const COIF4: [f64; 24] = [
        0.0008923139025370019,
        -0.0016294924252267845,
        -0.007346167936268053,
        0.01606894713157503,
        0.026682304669604827,
        -0.08126671024919373,
        -0.05607731960356925,
        0.41530842700068227,
        0.7822389344242826,
        0.43438603311435653,
        -0.06662747236681715,
        -0.09622042453595263,
        0.03933442260558914,
        0.02508225333794961,
        -0.015211728187697213,
        -0.005658283800130882,
        0.003751434697146086,
        0.0012665610789256603,
        -0.0005890202246332163,
        -0.00025997433712225676,
        6.233885431278714e-05,
        3.1229861599195244e-05,
        -3.2596479400307455e-06,
        -1.784990914493343e-06,
    ];

    pub(super) const COIF5: [f64; 30] = [
        -0.000212081862067491,
        0.0003585777411617539,
        0.0021782943778456995,
        -0.0041593126275786445,
        -0.010131584846900273,
        0.02340832211892778,
        0.028169744270532357,
        -0.09192158806008609,
        -0.05204667025355476,
        0.42157126673075435,
        0.7742936228603274,
        0.4379823066591634,
        -0.06203775157498195,
        -0.10556315130733723,
        0.04128753047211784,
        0.03267479946705735,
        -0.01975839160096546,
        -0.009159507338676166,
        0.006761520220620421,
        0.0024315754425382843,
        -0.0016616273039298775,
        -0.0006375589261258814,
        0.00030185794166824424,
        0.00014035632812373221,
        -4.121986192426533e-05,
        -2.127022167251552e-05,
        3.700727711339443e-06,
        2.061220398578855e-06,
        -1.6237995172047978e-07,
        -9.604010112767645e-08,
    ];

    pub(super) const SYM2: [f64; 4] = [
        0.48296291314476447,
        0.8365163037377462,
        0.22414386804178305,
        -0.12940952255119867,
    ];

    pub(super) const SYM3: [f64; 6] = [
        0.33267055294955494,
        0.8068915093116749,
        0.45987750211804157,
        -0.13501102001035253,
        -0.08544127388104897,
        0.03522629188522514,
    ];

    pub(super) const SYM4: [f64; 8] = [
        0.03222310060383634,
        -0.012603967262004611,
        -0.09921954357686891,
        0.29785779560545095,
        0.8037387518055226,
        0.49761866763210466,
        -0.029635527645942513,
        -0.07576571478900349,
    ];

    pub(super) const SYM5: [f64; 10] = [
        0.01953888273515009,
        -0.021101834024259275,
        -0.17532808990891421,
        0.01660210576486957,
        0.6339789634578779,
        0.7234076904028621,
        0.19939753397702287,
        -0.039134249302067436,
        0.02951949092541097,
        0.0273330683451425,
    ];
}
use coefficients::*;
