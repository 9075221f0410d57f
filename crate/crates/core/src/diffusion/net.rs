use crate::autodiff::{Graph, GraphBuilder, NodeId, Tensor};
use crate::Result;
use rand::Rng;

/// Denoiser architecture settings. Parameter layout is a pure function of
/// this struct, so checkpoints embed it verbatim.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    pub grid_h: usize,
    pub grid_w: usize,
    pub img_size: usize,
    /// Observation encoder stage widths (4 downsampling stages).
    pub obs_widths: [usize; 4],
    /// U-net level widths (3 levels).
    pub unet_widths: [usize; 3],
    /// Observation code length.
    pub obs_code: usize,
    /// Sinusoidal time embedding length (input to the 2-layer MLP).
    pub time_embed: usize,
    /// Time code length.
    pub time_code: usize,
}

impl NetConfig {
    pub fn new(grid_h: usize, grid_w: usize, img_size: usize) -> Self {
        NetConfig {
            grid_h,
            grid_w,
            img_size,
            obs_widths: [16, 32, 64, 128],
            unet_widths: [32, 64, 128],
            obs_code: 256,
            time_embed: 64,
            time_code: 128,
        }
    }

    fn cond_len(&self) -> usize {
        self.obs_code + self.time_code
    }
}

/// Conditional noise predictor ε_θ(x_t, o_d, t).
///
/// Input slots: 0 = x_t (N,3,H,W), 1 = observation (N,1,S,S) in [0,1],
/// 2 = sinusoidal time embedding (N,E), 3 = ε target (N,3,H,W; zeros when
/// only predicting). `pred` is the ε estimate node, `loss` the MSE node.
pub struct DenoiserNet {
    pub cfg: NetConfig,
    graph: Graph,
    pred: NodeId,
    loss: NodeId,
    pub params: Vec<Tensor>,
}

fn down(n: usize) -> usize {
    (n - 1) / 2 + 1
}

/// Output padding restoring `target` from a stride-2 transposed conv on `n`.
fn up_pad(n: usize, target: usize) -> usize {
    let base = 2 * n - 1;
    assert!(target == base || target == base + 1, "up path cannot reach {target} from {n}");
    target - base
}

/// conv → groupnorm → FiLM, with a residual skip and a trailing mish.
fn film_res_block(g: &mut GraphBuilder, x: NodeId, c: usize, cond: NodeId, cond_len: usize) -> NodeId {
    let fc = g.linear(cond, cond_len, 2 * c);
    let mut h = g.conv2d(x, c, c, 3, 1, 1);
    h = g.group_norm(h, c);
    h = g.film(h, fc);
    let s = g.add(x, h);
    g.mish(s)
}

/// Plain residual block for the observation encoder.
fn res_block(g: &mut GraphBuilder, x: NodeId, c: usize) -> NodeId {
    let mut h = g.conv2d(x, c, c, 3, 1, 1);
    h = g.group_norm(h, c);
    let s = g.add(x, h);
    g.mish(s)
}

impl DenoiserNet {
    pub fn new<R: Rng>(cfg: NetConfig, rng: &mut R) -> Result<Self> {
        let (graph, pred, loss) = build_graph(&cfg);
        let mut params = graph.init_params(rng);
        // damp the ε head so the untrained net predicts near zero (initial
        // MSE against unit-variance noise ≈ 1) while keeping gradients alive
        let head_w = params.len() - 2;
        for v in params[head_w].data_mut() {
            *v *= 0.05;
        }
        Ok(DenoiserNet { cfg, graph, pred, loss, params })
    }

    /// Rebuild the graph for existing parameters (checkpoint load).
    pub fn with_params(cfg: NetConfig, params: Vec<Tensor>) -> Result<Self> {
        let (graph, pred, loss) = build_graph(&cfg);
        let expected = graph.param_shapes();
        if params.len() != expected.len()
            || params.iter().zip(&expected).any(|(p, s)| p.shape() != s.as_slice())
        {
            return Err(crate::Error::Checkpoint("parameter shapes do not match config".into()));
        }
        Ok(DenoiserNet { cfg, graph, pred, loss, params })
    }

    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.graph.param_shapes()
    }

    /// Parameter shapes implied by a config, without building a network.
    pub fn param_shapes_of(cfg: &NetConfig) -> Vec<Vec<usize>> {
        build_graph(cfg).0.param_shapes()
    }

    /// Sinusoidal embedding of an original 1-based timestep.
    pub fn time_embedding(&self, t: usize) -> Vec<f32> {
        time_embedding(t, self.cfg.time_embed)
    }

    /// ε estimate for a batch. `t_embed` is (N,E) — one row per sample.
    pub fn predict(&self, x_t: &Tensor, obs: &Tensor, t_embed: &Tensor) -> Result<Tensor> {
        let dummy = Tensor::zeros(x_t.shape());
        let acts =
            self.graph.evaluate(&self.params, &[x_t.clone(), obs.clone(), t_embed.clone(), dummy])?;
        Ok(acts[self.pred].clone())
    }

    /// MSE(ε, ε_θ) and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        x_t: &Tensor,
        obs: &Tensor,
        t_embed: &Tensor,
        target: &Tensor,
    ) -> Result<(f32, Vec<Tensor>)> {
        self.graph.gradients(
            &self.params,
            &[x_t.clone(), obs.clone(), t_embed.clone(), target.clone()],
            self.loss,
        )
    }
}

fn build_graph(cfg: &NetConfig) -> (Graph, NodeId, NodeId) {
    let cl = cfg.cond_len();
    let mut g = GraphBuilder::new();
    let x = g.input();
    let obs = g.input();
    let temb = g.input();
    let target = g.input();

    // observation encoder: stem + 4 stride-2 stages with residual blocks,
    // spatial mean pool, then a linear head to the observation code
    let w = cfg.obs_widths;
    let mut h = g.conv2d(obs, 1, w[0], 3, 1, 1);
    h = g.group_norm(h, w[0]);
    h = g.mish(h);
    let mut c_in = w[0];
    for &c in &w {
        h = g.conv2d(h, c_in, c, 3, 2, 1);
        h = g.group_norm(h, c);
        h = g.mish(h);
        h = res_block(&mut g, h, c);
        c_in = c;
    }
    let pooled = g.mean_pool(h);
    let mut obs_code = g.linear(pooled, w[3], cfg.obs_code);
    obs_code = g.mish(obs_code);

    // time encoder: 2-layer MLP over the sinusoidal embedding
    let mut tc = g.linear(temb, cfg.time_embed, cfg.time_code);
    tc = g.mish(tc);
    tc = g.linear(tc, cfg.time_code, cfg.time_code);

    let cond = g.concat(obs_code, tc);

    // U-net over the translation map
    let u = cfg.unet_widths;
    let (h0, w0) = (cfg.grid_h, cfg.grid_w);
    let (h1, w1) = (down(h0), down(w0));
    let (h2, w2) = (down(h1), down(w1));

    let mut e0 = g.conv2d(x, 3, u[0], 3, 1, 1);
    e0 = film_res_block(&mut g, e0, u[0], cond, cl);
    let mut e1 = g.conv2d(e0, u[0], u[1], 3, 2, 1);
    e1 = film_res_block(&mut g, e1, u[1], cond, cl);
    let mut mid = g.conv2d(e1, u[1], u[2], 3, 2, 1);
    mid = film_res_block(&mut g, mid, u[2], cond, cl);

    let up1 = g.conv_t2d(mid, u[2], u[1], 3, 2, 1, (up_pad(h2, h1), up_pad(w2, w1)));
    let cat1 = g.concat(up1, e1);
    let mut d1 = g.conv2d(cat1, 2 * u[1], u[1], 3, 1, 1);
    d1 = film_res_block(&mut g, d1, u[1], cond, cl);

    let up0 = g.conv_t2d(d1, u[1], u[0], 3, 2, 1, (up_pad(h1, h0), up_pad(w1, w0)));
    let cat0 = g.concat(up0, e0);
    let mut d0 = g.conv2d(cat0, 2 * u[0], u[0], 3, 1, 1);
    d0 = film_res_block(&mut g, d0, u[0], cond, cl);

    let pred = g.conv2d(d0, u[0], 3, 3, 1, 1);
    let loss = g.mse(pred, target);
    (g.build(), pred, loss)
}

/// Standard sinusoidal position embedding: sin/cos pairs at geometrically
/// spaced frequencies.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f32> {
    assert!(dim >= 2 && dim % 2 == 0, "embedding length must be even");
    let half = dim / 2;
    let mut e = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = (-(i as f64) / half as f64 * 10_000f64.ln()).exp();
        e.push((t as f64 * freq).sin() as f32);
    }
    for i in 0..half {
        let freq = (-(i as f64) / half as f64 * 10_000f64.ln()).exp();
        e.push((t as f64 * freq).cos() as f32);
    }
    e
}
