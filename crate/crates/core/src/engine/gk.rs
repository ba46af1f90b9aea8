//! 21-point Gauss–Kronrod rule with its embedded 10-point Gauss rule.

/// Kronrod abscissae on [−1, 1], non-negative half, descending.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod abscissae XGK[1], XGK[3], ….
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

pub(crate) const NODES: usize = 21;

/// Full rule on [−1, 1]: (abscissa, Kronrod weight, Gauss weight or 0).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Rule {
    pub x: [f64; NODES],
    pub wk: [f64; NODES],
    pub wg: [f64; NODES],
}

pub(crate) const fn rule() -> Rule {
    let mut x = [0.0; NODES];
    let mut wk = [0.0; NODES];
    let mut wg = [0.0; NODES];
    let mut i = 0;
    while i < 10 {
        x[i] = -XGK[i];
        x[NODES - 1 - i] = XGK[i];
        wk[i] = WGK[i];
        wk[NODES - 1 - i] = WGK[i];
        if i % 2 == 1 {
            wg[i] = WG[i / 2];
            wg[NODES - 1 - i] = WG[i / 2];
        }
        i += 1;
    }
    x[10] = 0.0;
    wk[10] = WGK[10];
    Rule { x, wk, wg }
}

pub(crate) const RULE: Rule = rule();

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let k: f64 = RULE.wk.iter().sum();
        let g: f64 = RULE.wg.iter().sum();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
        assert_eq!(RULE.wg.iter().filter(|&&w| w > 0.0).count(), 10);
    }

    #[test]
    fn exactness_degrees() {
        // Gauss 10 is exact to degree 19, Kronrod 21 to degree 31
        for p in [2, 10, 18] {
            let g: f64 = (0..NODES).map(|i| RULE.wg[i] * RULE.x[i].powi(p)).sum();
            assert!((g - 2.0 / (p as f64 + 1.0)).abs() < 1e-14, "{p}");
        }
        for p in [20, 26, 30] {
            let k: f64 = (0..NODES).map(|i| RULE.wk[i] * RULE.x[i].powi(p)).sum();
            assert!((k - 2.0 / (p as f64 + 1.0)).abs() < 1e-14, "{p}");
        }
        let g20: f64 = (0..NODES).map(|i| RULE.wg[i] * RULE.x[i].powi(20)).sum();
        assert!((g20 - 2.0 / 21.0).abs() > 1e-8);
    }
}
