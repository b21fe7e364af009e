//! Analysis/synthesis transforms and the mean-scale hyperprior.

use rand::Rng;

use crate::codec::config::{HYPER_STRIDE, LATENT_STRIDE};
use crate::codec::entropy::{FactorizedPrior, SCALE_FLOOR};
use crate::error::{Error, Result};
use crate::nn::{Conv2d, ConvTranspose2d, Gdn, Graph, ParamId, ParamStore, Scalar, Tensor, Var};

/// `softplus^-1(1)`: initial prior scale of one.
const UNIT_SOFTPLUS: f64 = 0.541_324_854_612_792_4;

#[derive(Clone, Debug)]
pub struct HyperpriorCodec {
    channels_n: usize,
    channels_m: usize,
    analysis: Vec<Conv2d>,
    analysis_gdn: Vec<Gdn>,
    latent: Conv2d,
    synthesis: Vec<ConvTranspose2d>,
    synthesis_gdn: Vec<Gdn>,
    hyper_analysis: Vec<Conv2d>,
    hyper_synthesis_up: Vec<ConvTranspose2d>,
    hyper_synthesis_out: Conv2d,
    prior_median: ParamId,
    prior_scale: ParamId,
}

impl HyperpriorCodec {
    /// Registers all parameters under `{prefix}.`.
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        prefix: &str,
        channels_n: usize,
        channels_m: usize,
        rng: &mut R,
    ) -> Self {
        let n = channels_n;
        let p = |s: &str| format!("{prefix}.{s}");
        let mut analysis = Vec::new();
        let mut analysis_gdn = Vec::new();
        for i in 0..4 {
            let inc = if i == 0 { 3 } else { n };
            analysis.push(Conv2d::new(store, &p(&format!("g_a.conv{i}")), inc, n, 5, 2, rng));
            if i < 3 {
                analysis_gdn.push(Gdn::new(store, &p(&format!("g_a.gdn{i}")), n, false));
            }
        }
        let latent = Conv2d::new(store, &p("g_a.out"), n, n, 3, 1, rng);

        let mut synthesis = Vec::new();
        let mut synthesis_gdn = Vec::new();
        for i in 0..4 {
            let outc = if i == 3 { 3 } else { n };
            synthesis.push(ConvTranspose2d::new(store, &p(&format!("g_s.deconv{i}")), n, outc, 5, 2, rng));
            if i < 3 {
                synthesis_gdn.push(Gdn::new(store, &p(&format!("g_s.igdn{i}")), n, true));
            }
        }
        // Start reconstructions at mid-grey.
        let last_bias = synthesis[3].bias;
        store.get_mut(last_bias).data_mut().fill(T::from_f64(0.5));

        let hyper_analysis = vec![
            Conv2d::new(store, &p("h_a.conv0"), n, channels_m, 3, 1, rng),
            Conv2d::new(store, &p("h_a.conv1"), channels_m, channels_m, 5, 2, rng),
            Conv2d::new(store, &p("h_a.conv2"), channels_m, channels_m, 5, 2, rng),
        ];
        let hyper_synthesis_up = vec![
            ConvTranspose2d::new(store, &p("h_s.deconv0"), channels_m, n, 5, 2, rng),
            ConvTranspose2d::new(store, &p("h_s.deconv1"), n, n, 5, 2, rng),
        ];
        let hyper_synthesis_out = Conv2d::new(store, &p("h_s.out"), n, 2 * n, 3, 1, rng);

        let prior_median = store.add(p("prior.median"), Tensor::zeros([channels_m, 1, 1]));
        let prior_scale = store.add(
            p("prior.scale"),
            Tensor::full([channels_m, 1, 1], T::from_f64(UNIT_SOFTPLUS)),
        );
        Self {
            channels_n,
            channels_m,
            analysis,
            analysis_gdn,
            latent,
            synthesis,
            synthesis_gdn,
            hyper_analysis,
            hyper_synthesis_up,
            hyper_synthesis_out,
            prior_median,
            prior_scale,
        }
    }

    pub fn channels_n(&self) -> usize {
        self.channels_n
    }

    pub fn channels_m(&self) -> usize {
        self.channels_m
    }

    /// `x` (3 x H x W) to the tap `f` and the latent `y`, both at H/16.
    pub fn analysis<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Result<(Var, Var)> {
        let [c, h, w] = g.shape(x);
        if c != 3 || h % LATENT_STRIDE != 0 || w % LATENT_STRIDE != 0 || h == 0 || w == 0 {
            return Err(Error::ShapeMismatch(format!(
                "analysis needs 3 x H x W with H, W multiples of {LATENT_STRIDE}, got {c}x{h}x{w}"
            )));
        }
        let mut t = x;
        for (i, conv) in self.analysis.iter().enumerate() {
            t = conv.forward(g, t);
            if let Some(gdn) = self.analysis_gdn.get(i) {
                t = gdn.forward(g, t);
            }
        }
        let y = self.latent.forward(g, t);
        Ok((t, y))
    }

    /// Latent to an unclipped reconstruction at 16x the latent size.
    pub fn synthesis<T: Scalar>(&self, g: &mut Graph<'_, T>, y_hat: Var) -> Result<Var> {
        self.expect_channels(g, y_hat, self.channels_n, "synthesis")?;
        let mut t = y_hat;
        for (i, deconv) in self.synthesis.iter().enumerate() {
            t = deconv.forward(g, t);
            if let Some(igdn) = self.synthesis_gdn.get(i) {
                t = igdn.forward(g, t);
            }
        }
        Ok(t)
    }

    pub fn hyper_analysis<T: Scalar>(&self, g: &mut Graph<'_, T>, y: Var) -> Result<Var> {
        self.expect_channels(g, y, self.channels_n, "hyper-analysis")?;
        let [_, h, w] = g.shape(y);
        let ratio = HYPER_STRIDE / LATENT_STRIDE;
        if h % ratio != 0 || w % ratio != 0 {
            return Err(Error::ShapeMismatch(format!(
                "latent {h}x{w} is not a multiple of {ratio}"
            )));
        }
        let mut t = self.hyper_analysis[0].forward(g, y);
        t = g.relu(t);
        t = self.hyper_analysis[1].forward(g, t);
        t = g.relu(t);
        Ok(self.hyper_analysis[2].forward(g, t))
    }

    /// Per-element mean and scale (floored at the scale floor) for `y`.
    pub fn hyper_synthesis<T: Scalar>(&self, g: &mut Graph<'_, T>, z_hat: Var) -> Result<(Var, Var)> {
        self.expect_channels(g, z_hat, self.channels_m, "hyper-synthesis")?;
        let mut t = self.hyper_synthesis_up[0].forward(g, z_hat);
        t = g.relu(t);
        t = self.hyper_synthesis_up[1].forward(g, t);
        t = g.relu(t);
        let out = self.hyper_synthesis_out.forward(g, t);
        let n = self.channels_n;
        let mean = g.slice_channels(out, 0, n);
        let raw = g.slice_channels(out, n, 2 * n);
        let sp = g.softplus(raw);
        let scale = g.lower_bound(sp, SCALE_FLOOR);
        Ok((mean, scale))
    }

    /// The hyper-latent prior broadcast to `height x width`.
    pub fn z_prior<T: Scalar>(&self, g: &mut Graph<'_, T>, height: usize, width: usize) -> (Var, Var) {
        let m = g.param(self.prior_median);
        let mean = g.broadcast_channels(m, height, width);
        let s = g.param(self.prior_scale);
        let s = g.softplus(s);
        let s = g.lower_bound(s, SCALE_FLOOR);
        let scale = g.broadcast_channels(s, height, width);
        (mean, scale)
    }

    /// The hyper-latent prior as plain numbers for entropy coding.
    pub fn factorized_prior<T: Scalar>(&self, store: &ParamStore<T>) -> FactorizedPrior {
        let medians = store.get(self.prior_median).data().iter().map(|v| v.to_f64() as f32).collect();
        let scales = store
            .get(self.prior_scale)
            .data()
            .iter()
            .map(|v| (softplus(v.to_f64()).max(SCALE_FLOOR)) as f32)
            .collect();
        FactorizedPrior { medians, scales }
    }

    fn expect_channels<T: Scalar>(&self, g: &Graph<'_, T>, v: Var, want: usize, what: &str) -> Result<()> {
        let shape = g.shape(v);
        if shape[0] != want {
            return Err(Error::ShapeMismatch(format!(
                "{what} expects {want} channels, got {shape:?}"
            )));
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    if x > 20.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}
