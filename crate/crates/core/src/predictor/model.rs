//! Feature extractor, semantic encoder, trajectory decoder and latent
//! discriminators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{softmax, ConvShape, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::{Intent, Scene, Trajectory, TrajectoryRole, Waypoint, DT, FUTURE_LEN, HISTORY_LEN};

use super::params::{fingerprint, ParamGroup, Tensor};
use super::prior::LatentGroup;

/// Arc-length distances ahead of the target at which the lane is sampled, m.
pub const LANE_LOOKAHEAD: [f64; 6] = [0.0, 5.0, 10.0, 15.0, 20.0, 30.0];
/// Discriminator outputs are clamped to `[DISC_EPS, 1 - DISC_EPS]`.
pub const DISC_EPS: f64 = 1e-7;

const CONV_KERNEL: usize = 3;
const CONV2_DILATION: usize = 2;
const NEIGHBOR_INPUT: usize = 4;
const LANE_FEATURES: usize = 2 * LANE_LOOKAHEAD.len();

/// Layer widths of the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Width `E` of the feature vector.
    pub embed_width: usize,
    /// Width `K` of the Gaussian latent group.
    pub latent_other_width: usize,
    pub conv_channels: usize,
    pub neighbor_width: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub disc_hidden: usize,
    /// Positions are divided by this before entering the network and the
    /// decoder output is multiplied by it, m.
    pub position_scale: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_width: 64,
            latent_other_width: 16,
            conv_channels: 16,
            neighbor_width: 8,
            encoder_hidden: 64,
            decoder_hidden: 64,
            disc_hidden: 16,
            position_scale: 10.0,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small widths for fast tests.
    pub fn tiny() -> Self {
        Self {
            embed_width: 8,
            latent_other_width: 3,
            conv_channels: 3,
            neighbor_width: 3,
            encoder_hidden: 6,
            decoder_hidden: 6,
            disc_hidden: 4,
            position_scale: 10.0,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.embed_width,
            self.latent_other_width,
            self.conv_channels,
            self.neighbor_width,
            self.encoder_hidden,
            self.decoder_hidden,
            self.disc_hidden,
        ];
        if widths.contains(&0) {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if !(self.position_scale > 0.0) || !self.position_scale.is_finite() {
            return Err(Error::Config("position_scale must be positive".into()));
        }
        Ok(())
    }

    fn conv1(&self) -> ConvShape {
        ConvShape {
            len_in: HISTORY_LEN,
            in_ch: 2,
            out_ch: self.conv_channels,
            kernel: CONV_KERNEL,
            dilation: 1,
        }
    }

    fn conv2(&self) -> ConvShape {
        ConvShape {
            len_in: self.conv1().len_out(),
            in_ch: self.conv_channels,
            out_ch: self.conv_channels,
            kernel: CONV_KERNEL,
            dilation: CONV2_DILATION,
        }
    }

    fn fused_width(&self) -> usize {
        self.conv2().len_out() * self.conv_channels + self.neighbor_width + LANE_FEATURES
    }

    /// Total latent width `1 + 3 + K`.
    pub fn latent_width(&self) -> usize {
        4 + self.latent_other_width
    }

    pub fn group_width(&self, g: LatentGroup) -> usize {
        match g {
            LatentGroup::Lon => 1,
            LatentGroup::Lat => 3,
            LatentGroup::Other => self.latent_other_width,
        }
    }
}

/// Encoder output split into its semantic groups.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<T> {
    /// Positive headway-scale feature.
    pub z_lon: T,
    /// Probabilities of (forward, left, right).
    pub z_lat: [T; 3],
    pub z_other: Vec<T>,
}

impl<T: Real> LatentState<T> {
    pub fn intent(&self) -> Intent {
        let mut best = 0;
        for i in 1..3 {
            if self.z_lat[i] > self.z_lat[best] {
                best = i;
            }
        }
        Intent::from_index(best).expect("index below 3")
    }

    pub fn group(&self, g: LatentGroup) -> Vec<T> {
        match g {
            LatentGroup::Lon => vec![self.z_lon],
            LatentGroup::Lat => self.z_lat.to_vec(),
            LatentGroup::Other => self.z_other.clone(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let sum: T = self.z_lat.iter().copied().sum();
        self.z_lon > T::zero()
            && self.z_lat.iter().all(|&p| p >= T::zero())
            && (sum - T::one()).abs() <= T::lit(1e-6)
    }
}

/// Latent nodes on a tape.
#[derive(Debug, Clone, Copy)]
pub struct LatentVars {
    pub lon: Var,
    pub lat: Var,
    pub other: Var,
}

impl LatentVars {
    pub fn group(&self, g: LatentGroup) -> Var {
        match g {
            LatentGroup::Lon => self.lon,
            LatentGroup::Lat => self.lat,
            LatentGroup::Other => self.other,
        }
    }
}

/// Nodes produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub history: Var,
    pub features: Var,
    pub latent: LatentVars,
    /// Future in the lane-aligned frame.
    pub local_future: Var,
    /// Future in the map frame.
    pub future: Var,
}

/// Parameter leaves of every group on one tape.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub extractor: Vec<Var>,
    pub encoder: Vec<Var>,
    pub decoder: Vec<Var>,
    pub discriminators: [Vec<Var>; 3],
}

/// Constant scene information consumed by the extractor: the lane-aligned
/// frame, neighbor states and lane samples ahead of the target.
///
/// The frame origin (anchor) is the projection of the last history point
/// onto the line of the nearest lane segment, `base + proj * (p - base)`;
/// without a lane it is the last history point itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext<T> {
    pub cos: T,
    pub sin: T,
    pub anchor_base: Waypoint<T>,
    /// Row-major 2x2 projection, `None` for the identity.
    pub anchor_proj: Option<[T; 4]>,
    pub neighbors: Vec<(Waypoint<T>, Waypoint<T>)>,
    pub lane_points: Option<Vec<Waypoint<T>>>,
}

fn closest_on_segment<T: Real>(a: Waypoint<T>, b: Waypoint<T>, p: Waypoint<T>) -> (T, T) {
    let d = b.sub(a);
    let len2 = d.dot(d);
    let u = (p.sub(a).dot(d) / len2).max(T::zero()).min(T::one());
    let q = a.add(d.scale(u));
    (q.dist(p), u)
}

impl<T: Real> SceneContext<T> {
    /// `history` is the (possibly perturbed) flat target history; its last
    /// waypoint selects the lane segment.
    pub fn new(scene: &Scene<T>, history: &[T]) -> Self {
        let origin = Waypoint::new(history[2 * HISTORY_LEN - 2], history[2 * HISTORY_LEN - 1]);
        let target = scene.target();
        let neighbors = scene
            .neighbors()
            .map(|a| {
                let h = &a.history.points;
                let vel = h[HISTORY_LEN - 1]
                    .sub(h[HISTORY_LEN - 2])
                    .scale(T::one() / T::lit(DT));
                (h[HISTORY_LEN - 1], vel)
            })
            .collect();

        let lane = target
            .lane_id
            .and_then(|id| scene.map.lane(id))
            .or_else(|| {
                scene.map.lanes.iter().min_by(|a, b| {
                    let da = lane_distance(a.points.as_slice(), origin);
                    let db = lane_distance(b.points.as_slice(), origin);
                    da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                })
            });
        let Some(lane) = lane else {
            return Self {
                cos: T::one(),
                sin: T::zero(),
                anchor_base: Waypoint::new(T::zero(), T::zero()),
                anchor_proj: None,
                neighbors,
                lane_points: None,
            };
        };

        // Polyline of the lane followed by its successors.
        let mut path: Vec<Waypoint<T>> = lane.points.clone();
        let mut next = lane.successor;
        let mut hops = 0;
        while let (Some(id), true) = (next, hops < 8) {
            let Some(l) = scene.map.lane(id) else { break };
            let skip = usize::from(path.last() == l.points.first());
            path.extend(l.points.iter().skip(skip));
            next = l.successor;
            hops += 1;
        }
        path.dedup();

        let (mut seg, mut frac, mut best) = (0, T::zero(), T::infinity());
        for (i, w) in path.windows(2).enumerate() {
            let (d, u) = closest_on_segment(w[0], w[1], origin);
            if d < best {
                (seg, frac, best) = (i, u, d);
            }
        }
        let dir = path[seg + 1].sub(path[seg]);
        let dir = dir.scale(T::one() / dir.norm());
        let lane_points = LANE_LOOKAHEAD
            .iter()
            .map(|&ahead| walk(&path, seg, frac, T::lit(ahead)))
            .collect();
        Self {
            cos: dir.x,
            sin: dir.y,
            anchor_base: path[seg],
            anchor_proj: Some([dir.x * dir.x, dir.x * dir.y, dir.x * dir.y, dir.y * dir.y]),
            neighbors,
            lane_points: Some(lane_points),
        }
    }
}

impl<T: Real> SceneContext<T> {
    /// Frame origin as a differentiable function of the history node.
    pub fn anchor_on_tape(&self, tape: &mut Tape<T>, history: Var) -> Var {
        let last = tape.slice(history, 2 * HISTORY_LEN - 2, 2);
        let Some(m) = self.anchor_proj else {
            return last;
        };
        let base = tape.leaf(vec![self.anchor_base.x, self.anchor_base.y]);
        let rel = tape.sub(last, base);
        let m = tape.leaf(m.to_vec());
        let projected = tape.matvec(m, rel, 2, 2);
        tape.add(projected, base)
    }
}

fn lane_distance<T: Real>(pts: &[Waypoint<T>], p: Waypoint<T>) -> T {
    pts.windows(2)
        .map(|w| closest_on_segment(w[0], w[1], p).0)
        .fold(T::infinity(), T::min)
}

/// Point `ahead` meters along the polyline from segment `seg` at fraction
/// `frac`; extrapolates past the end.
fn walk<T: Real>(path: &[Waypoint<T>], seg: usize, frac: T, ahead: T) -> Waypoint<T> {
    let mut i = seg;
    let seg_len = path[i + 1].dist(path[i]);
    let mut remaining = ahead + frac * seg_len;
    loop {
        let len = path[i + 1].dist(path[i]);
        let last = i + 2 == path.len();
        if remaining <= len || last {
            let dir = path[i + 1].sub(path[i]).scale(T::one() / len);
            return path[i].add(dir.scale(remaining));
        }
        remaining -= len;
        i += 1;
    }
}

/// The predictor with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel<T> {
    pub config: ModelConfig,
    pub extractor: ParamGroup<T>,
    pub encoder: ParamGroup<T>,
    pub decoder: ParamGroup<T>,
    pub discriminators: [ParamGroup<T>; 3],
}

// tensor order inside each group
mod idx {
    pub const CONV1_W: usize = 0;
    pub const CONV1_B: usize = 1;
    pub const CONV2_W: usize = 2;
    pub const CONV2_B: usize = 3;
    pub const NB_W: usize = 4;
    pub const NB_B: usize = 5;
    pub const FUSE_W: usize = 6;
    pub const FUSE_B: usize = 7;

    pub const HID_W: usize = 0;
    pub const HID_B: usize = 1;
    pub const HEAD_W: usize = 2;
    pub const HEAD_B: usize = 3;

    pub const D1_W: usize = 0;
    pub const D1_B: usize = 1;
    pub const D2_W: usize = 2;
    pub const D2_B: usize = 3;
    pub const OUT_W: usize = 4;
    pub const OUT_B: usize = 5;
}

fn dense<T: Real>(tape: &mut Tape<T>, w: Var, b: Var, x: Var, rows: usize, cols: usize) -> Var {
    let y = tape.matvec(w, x, rows, cols);
    tape.add(y, b)
}

impl<T: Real> PredictorModel<T> {
    /// Randomly initialised model (seeded by `config.init_seed`).
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let c = config.conv_channels;
        let e = config.embed_width;
        let k = CONV_KERNEL;

        let mut extractor = ParamGroup::default();
        extractor.push(Tensor::glorot("conv1.w", &[c, 2, k], 2 * k, c * k, &mut rng));
        extractor.push(Tensor::zeros("conv1.b", &[c]));
        extractor.push(Tensor::glorot("conv2.w", &[c, c, k], c * k, c * k, &mut rng));
        extractor.push(Tensor::zeros("conv2.b", &[c]));
        let nw = config.neighbor_width;
        extractor.push(Tensor::glorot("neighbor.w", &[nw, NEIGHBOR_INPUT], NEIGHBOR_INPUT, nw, &mut rng));
        extractor.push(Tensor::zeros("neighbor.b", &[nw]));
        let fw = config.fused_width();
        extractor.push(Tensor::glorot("fuse.w", &[e, fw], fw, e, &mut rng));
        extractor.push(Tensor::zeros("fuse.b", &[e]));

        let h = config.encoder_hidden;
        let lw = config.latent_width();
        let mut encoder = ParamGroup::default();
        encoder.push(Tensor::glorot("hidden.w", &[h, e], e, h, &mut rng));
        encoder.push(Tensor::zeros("hidden.b", &[h]));
        encoder.push(Tensor::glorot("head.w", &[lw, h], h, lw, &mut rng));
        encoder.push(Tensor::zeros("head.b", &[lw]));

        let d = config.decoder_hidden;
        let out = 2 * FUTURE_LEN;
        let mut decoder = ParamGroup::default();
        decoder.push(Tensor::glorot("d1.w", &[d, lw], lw, d, &mut rng));
        decoder.push(Tensor::zeros("d1.b", &[d]));
        decoder.push(Tensor::glorot("d2.w", &[d, d], d, d, &mut rng));
        decoder.push(Tensor::zeros("d2.b", &[d]));
        decoder.push(Tensor::glorot("out.w", &[out, d], d, out, &mut rng));
        decoder.push(Tensor::zeros("out.b", &[out]));

        let dh = config.disc_hidden;
        let discriminators = LatentGroup::ALL.map(|g| {
            let w = config.group_width(g);
            let mut p = ParamGroup::default();
            p.push(Tensor::glorot(format!("{}.w1", g.name()), &[dh, w], w, dh, &mut rng));
            p.push(Tensor::zeros(format!("{}.b1", g.name()), &[dh]));
            p.push(Tensor::glorot(format!("{}.w2", g.name()), &[1, dh], dh, 1, &mut rng));
            p.push(Tensor::zeros(format!("{}.b2", g.name()), &[1]));
            p
        });

        Ok(Self {
            config,
            extractor,
            encoder,
            decoder,
            discriminators,
        })
    }

    /// Groups in checkpoint order.
    pub fn groups(&self) -> Vec<&ParamGroup<T>> {
        let mut v = vec![&self.extractor, &self.encoder, &self.decoder];
        v.extend(self.discriminators.iter());
        v
    }

    pub fn groups_mut(&mut self) -> Vec<&mut ParamGroup<T>> {
        let [d0, d1, d2] = &mut self.discriminators;
        vec![&mut self.extractor, &mut self.encoder, &mut self.decoder, d0, d1, d2]
    }

    pub fn num_params(&self) -> usize {
        self.groups().iter().map(|g| g.num_params()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.is_finite())
    }

    /// Hash of every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let all: Vec<T> = self.groups().iter().flat_map(|g| g.flatten()).collect();
        fingerprint(&all)
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        BoundParams {
            extractor: self.extractor.bind(tape),
            encoder: self.encoder.bind(tape),
            decoder: self.decoder.bind(tape),
            discriminators: [
                self.discriminators[0].bind(tape),
                self.discriminators[1].bind(tape),
                self.discriminators[2].bind(tape),
            ],
        }
    }

    fn scale(&self) -> T {
        T::lit(self.config.position_scale)
    }

    /// Feature vector `x` for the target history node `history`.
    pub fn extract_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        ctx: &SceneContext<T>,
        history: Var,
    ) -> Var {
        let cfg = &self.config;
        let inv = T::one() / self.scale();
        let w = &p.extractor;

        let origin = ctx.anchor_on_tape(tape, history);
        let neg_origin = tape.scale(origin, -T::one());
        let rel = tape.add_tiled(history, neg_origin);
        let local = tape.rotate2(rel, ctx.cos, -ctx.sin);
        let input = tape.scale(local, inv);

        let c = cfg.conv_channels;
        let h1 = tape.conv1d(w[idx::CONV1_W], input, cfg.conv1());
        let h1 = tape.add_tiled(h1, w[idx::CONV1_B]);
        let h1 = tape.tanh(h1);
        let h2 = tape.conv1d(w[idx::CONV2_W], h1, cfg.conv2());
        let h2 = tape.add_tiled(h2, w[idx::CONV2_B]);
        let h2 = tape.tanh(h2);

        let nw = cfg.neighbor_width;
        let pooled = if ctx.neighbors.is_empty() {
            tape.leaf(vec![T::zero(); nw])
        } else {
            let encoded: Vec<Var> = ctx
                .neighbors
                .iter()
                .map(|(pos, vel)| {
                    let q = tape.leaf(vec![pos.x, pos.y]);
                    let rel = tape.add(q, neg_origin);
                    let rel = tape.rotate2(rel, ctx.cos, -ctx.sin);
                    let rel = tape.scale(rel, inv);
                    let (vx, vy) = (
                        (ctx.cos * vel.x + ctx.sin * vel.y) * inv,
                        (-ctx.sin * vel.x + ctx.cos * vel.y) * inv,
                    );
                    let v = tape.leaf(vec![vx, vy]);
                    let inp = tape.concat(&[rel, v]);
                    let e = dense(tape, w[idx::NB_W], w[idx::NB_B], inp, nw, NEIGHBOR_INPUT);
                    tape.tanh(e)
                })
                .collect();
            tape.mean_of(&encoded)
        };

        let lane = match &ctx.lane_points {
            Some(pts) => {
                let flat: Vec<T> = pts.iter().flat_map(|q| [q.x, q.y]).collect();
                let q = tape.leaf(flat);
                let rel = tape.add_tiled(q, neg_origin);
                let rel = tape.rotate2(rel, ctx.cos, -ctx.sin);
                tape.scale(rel, inv)
            }
            None => tape.leaf(vec![T::zero(); LANE_FEATURES]),
        };

        let fused = tape.concat(&[h2, pooled, lane]);
        debug_assert_eq!(tape.len_of(fused), cfg.fused_width());
        debug_assert_eq!(tape.len_of(h2), cfg.conv2().len_out() * c);
        let x = dense(
            tape,
            w[idx::FUSE_W],
            w[idx::FUSE_B],
            fused,
            cfg.embed_width,
            cfg.fused_width(),
        );
        tape.tanh(x)
    }

    pub fn encode_on_tape(&self, tape: &mut Tape<T>, p: &BoundParams, x: Var) -> LatentVars {
        let cfg = &self.config;
        let w = &p.encoder;
        let h = dense(tape, w[idx::HID_W], w[idx::HID_B], x, cfg.encoder_hidden, cfg.embed_width);
        let h = tape.tanh(h);
        let head = dense(
            tape,
            w[idx::HEAD_W],
            w[idx::HEAD_B],
            h,
            cfg.latent_width(),
            cfg.encoder_hidden,
        );
        let lon = tape.slice(head, 0, 1);
        let lon = tape.exp(lon);
        let lat = tape.slice(head, 1, 3);
        let lat = tape.softmax(lat);
        let other = tape.slice(head, 4, cfg.latent_other_width);
        LatentVars { lon, lat, other }
    }

    /// Future offsets in the lane-aligned frame.
    pub fn decode_on_tape(&self, tape: &mut Tape<T>, p: &BoundParams, z: &LatentVars) -> Var {
        let cfg = &self.config;
        let w = &p.decoder;
        let zin = tape.concat(&[z.lon, z.lat, z.other]);
        let d = cfg.decoder_hidden;
        let h = dense(tape, w[idx::D1_W], w[idx::D1_B], zin, d, cfg.latent_width());
        let h = tape.tanh(h);
        let h = dense(tape, w[idx::D2_W], w[idx::D2_B], h, d, d);
        let h = tape.tanh(h);
        let out = dense(tape, w[idx::OUT_W], w[idx::OUT_B], h, 2 * FUTURE_LEN, d);
        tape.scale(out, self.scale())
    }

    /// Clamped probability that `value` was drawn from the prior of `group`.
    pub fn discriminate_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        group: LatentGroup,
        value: Var,
    ) -> Var {
        let w = &p.discriminators[group.index()];
        let dh = self.config.disc_hidden;
        let width = self.config.group_width(group);
        let h = dense(tape, w[0], w[1], value, dh, width);
        let h = tape.tanh(h);
        let logit = dense(tape, w[2], w[3], h, 1, dh);
        let prob = tape.sigmoid(logit);
        let eps = T::lit(DISC_EPS);
        tape.clamp(prob, eps, T::one() - eps)
    }

    /// Maps a local-frame future into the map frame.
    pub fn to_world_on_tape(
        &self,
        tape: &mut Tape<T>,
        ctx: &SceneContext<T>,
        history: Var,
        local: Var,
    ) -> Var {
        let origin = ctx.anchor_on_tape(tape, history);
        let rotated = tape.rotate2(local, ctx.cos, ctx.sin);
        tape.add_tiled(rotated, origin)
    }

    /// Full forward pass from the target history node.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape<T>,
        p: &BoundParams,
        scene: &Scene<T>,
        history: Var,
    ) -> ForwardVars {
        let ctx = SceneContext::new(scene, tape.value(history));
        let features = self.extract_on_tape(tape, p, &ctx, history);
        let latent = self.encode_on_tape(tape, p, features);
        let local_future = self.decode_on_tape(tape, p, &latent);
        let future = self.to_world_on_tape(tape, &ctx, history, local_future);
        ForwardVars {
            history,
            features,
            latent,
            local_future,
            future,
        }
    }

    pub fn extract_features(&self, scene: &Scene<T>) -> Vec<T> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let hist_flat = scene.target().history.to_flat();
        let ctx = SceneContext::new(scene, &hist_flat);
        let history = tape.leaf(hist_flat);
        let x = self.extract_on_tape(&mut tape, &p, &ctx, history);
        tape.value(x).to_vec()
    }

    pub fn encode(&self, x: &[T]) -> Result<LatentState<T>> {
        if x.len() != self.config.embed_width {
            return Err(Error::WidthMismatch {
                group: "feature",
                expected: self.config.embed_width,
                found: x.len(),
            });
        }
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let xv = tape.leaf(x.to_vec());
        let z = self.encode_on_tape(&mut tape, &p, xv);
        Ok(read_latent(&tape, &z))
    }

    /// Future in the lane-aligned frame of [`SceneContext`] (+x along the
    /// lane, origin at the target's last position projected onto the lane).
    pub fn decode(&self, z: &LatentState<T>) -> Result<Trajectory<T>> {
        if z.z_other.len() != self.config.latent_other_width {
            return Err(Error::WidthMismatch {
                group: "other",
                expected: self.config.latent_other_width,
                found: z.z_other.len(),
            });
        }
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let zv = LatentVars {
            lon: tape.leaf(vec![z.z_lon]),
            lat: tape.leaf(z.z_lat.to_vec()),
            other: tape.leaf(z.z_other.clone()),
        };
        let out = self.decode_on_tape(&mut tape, &p, &zv);
        Ok(Trajectory::from_flat(TrajectoryRole::Future, tape.value(out)))
    }

    /// Predicted future in the map frame and the latent state.
    pub fn predict(&self, scene: &Scene<T>) -> (Trajectory<T>, LatentState<T>) {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let history = tape.leaf(scene.target().history.to_flat());
        let f = self.forward_on_tape(&mut tape, &p, scene, history);
        (
            Trajectory::from_flat(TrajectoryRole::Future, tape.value(f.future)),
            read_latent(&tape, &f.latent),
        )
    }

    pub fn discriminate(&self, group: LatentGroup, value: &[T]) -> Result<T> {
        let width = self.config.group_width(group);
        if value.len() != width {
            return Err(Error::WidthMismatch {
                group: group.name(),
                expected: width,
                found: value.len(),
            });
        }
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let v = tape.leaf(value.to_vec());
        let d = self.discriminate_on_tape(&mut tape, &p, group, v);
        Ok(tape.scalar(d))
    }
}

pub fn read_latent<T: Real>(tape: &Tape<T>, z: &LatentVars) -> LatentState<T> {
    let lat = tape.value(z.lat);
    LatentState {
        z_lon: tape.scalar(z.lon),
        z_lat: [lat[0], lat[1], lat[2]],
        z_other: tape.value(z.other).to_vec(),
    }
}

/// Softmax readout used for the uniform-logit check.
pub fn uniform_simplex<T: Real>() -> [T; 3] {
    let p = softmax(&[T::zero(); 3]);
    [p[0], p[1], p[2]]
}
