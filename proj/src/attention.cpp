#include "dgcim/attention.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dgcim {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::QuantizedDigital: return "quantized-digital";
        case Mode::CimBilinear: return "cim-bilinear";
        case Mode::CimTrilinear: return "cim-trilinear";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "quantized-digital" || s == "digital") return Mode::QuantizedDigital;
    if (s == "cim-bilinear" || s == "bilinear") return Mode::CimBilinear;
    if (s == "cim-trilinear" || s == "trilinear") return Mode::CimTrilinear;
    throw std::invalid_argument("unknown execution mode: " + s);
}

void validate(const AttentionJob& job) {
    if (job.n_tokens < 1) throw std::invalid_argument("AttentionJob: n_tokens must be >= 1");
    if (job.d_k < 1 || job.n_heads < 1 || job.n_layers < 1)
        throw std::invalid_argument("AttentionJob: dimensions must be >= 1");
    if (job.d_model != job.n_heads * job.d_k)
        throw std::invalid_argument("AttentionJob: d_model must equal n_heads * d_k");
    if (!job.x_input.empty() &&
        (job.x_input.rows != static_cast<std::size_t>(job.n_tokens) ||
         job.x_input.cols != static_cast<std::size_t>(job.d_model)))
        throw std::invalid_argument("AttentionJob: x_input shape mismatch");
}

std::vector<LayerWeights> generate_weights(const AttentionJob& job) {
    const std::size_t d = static_cast<std::size_t>(job.d_model);
    const std::size_t dk = static_cast<std::size_t>(job.d_k);
    const double ws = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<LayerWeights> out(static_cast<std::size_t>(job.n_layers));
    for (int l = 0; l < job.n_layers; ++l) {
        LayerWeights& lw = out[static_cast<std::size_t>(l)];
        for (int h = 0; h < job.n_heads; ++h) {
            const std::string tag = "l" + std::to_string(l) + ".h" + std::to_string(h);
            auto rq = seeded_stream(job.seed, "weights.wq." + tag);
            auto rk = seeded_stream(job.seed, "weights.wk." + tag);
            auto rv = seeded_stream(job.seed, "weights.wv." + tag);
            lw.w_q.push_back(random_mat(rq, dk, d, -ws, ws));
            lw.w_k.push_back(random_mat(rk, dk, d, -ws, ws));
            lw.w_v.push_back(random_mat(rv, dk, d, -ws, ws));
        }
        auto ro = seeded_stream(job.seed, "weights.wo.l" + std::to_string(l));
        lw.w_o = random_mat(ro, d, d, -ws, ws);
        auto r1 = seeded_stream(job.seed, "weights.ffn1.l" + std::to_string(l));
        auto r2 = seeded_stream(job.seed, "weights.ffn2.l" + std::to_string(l));
        lw.ffn_w1 = random_mat(r1, d, 4 * d, -ws, ws);
        lw.ffn_w2 = random_mat(r2, 4 * d, d, -0.5 * ws, 0.5 * ws);
        auto rg = seeded_stream(job.seed, "weights.ln.l" + std::to_string(l));
        lw.ln1_gamma.resize(d);
        lw.ln1_beta.resize(d);
        lw.ln2_gamma.resize(d);
        lw.ln2_beta.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            lw.ln1_gamma[i] = uniform_double(rg, 0.8, 1.2);
            lw.ln1_beta[i] = uniform_double(rg, -0.2, 0.2);
            lw.ln2_gamma[i] = uniform_double(rg, 0.8, 1.2);
            lw.ln2_beta[i] = uniform_double(rg, -0.2, 0.2);
        }
    }
    return out;
}

Mat generate_input(const AttentionJob& job) {
    if (!job.x_input.empty()) return job.x_input;
    auto rng = seeded_stream(job.seed, "input.x");
    return random_mat(rng, static_cast<std::size_t>(job.n_tokens),
                      static_cast<std::size_t>(job.d_model), -1.0, 1.0);
}

namespace {

void write_tensor(std::ofstream& bin, std::ofstream& shape, const std::string& name,
                  const Mat& m) {
    shape << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (double v : m.data) {
        const float f = static_cast<float>(v);
        bin.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

Mat vec_to_mat(const std::vector<double>& v) {
    Mat m(1, v.size());
    m.data = v;
    return m;
}

}  // namespace

void save_weights(const std::vector<LayerWeights>& weights, const std::string& basename) {
    std::ofstream bin(basename + ".bin", std::ios::binary);
    std::ofstream shape(basename + ".shape");
    if (!bin || !shape) throw std::runtime_error("save_weights: cannot open " + basename);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const LayerWeights& lw = weights[l];
        const std::string p = "l" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < lw.w_q.size(); ++h) {
            const std::string hp = p + "h" + std::to_string(h) + ".";
            write_tensor(bin, shape, hp + "wq", lw.w_q[h]);
            write_tensor(bin, shape, hp + "wk", lw.w_k[h]);
            write_tensor(bin, shape, hp + "wv", lw.w_v[h]);
        }
        write_tensor(bin, shape, p + "wo", lw.w_o);
        write_tensor(bin, shape, p + "ffn_w1", lw.ffn_w1);
        write_tensor(bin, shape, p + "ffn_w2", lw.ffn_w2);
        write_tensor(bin, shape, p + "ln1_gamma", vec_to_mat(lw.ln1_gamma));
        write_tensor(bin, shape, p + "ln1_beta", vec_to_mat(lw.ln1_beta));
        write_tensor(bin, shape, p + "ln2_gamma", vec_to_mat(lw.ln2_gamma));
        write_tensor(bin, shape, p + "ln2_beta", vec_to_mat(lw.ln2_beta));
    }
}

std::vector<LayerWeights> load_weights(const std::string& basename, const AttentionJob& job) {
    std::ifstream bin(basename + ".bin", std::ios::binary);
    std::ifstream shape(basename + ".shape");
    if (!bin || !shape) throw std::runtime_error("load_weights: cannot open " + basename);

    std::map<std::string, Mat> tensors;
    std::string name;
    std::size_t rows, cols;
    while (shape >> name >> rows >> cols) {
        Mat m(rows, cols);
        for (double& v : m.data) {
            float f;
            bin.read(reinterpret_cast<char*>(&f), sizeof(float));
            if (!bin) throw std::runtime_error("load_weights: binary file truncated");
            v = static_cast<double>(f);
        }
        tensors[name] = std::move(m);
    }

    auto fetch = [&](const std::string& key, std::size_t want_rows, std::size_t want_cols) -> Mat {
        auto it = tensors.find(key);
        if (it == tensors.end()) throw std::runtime_error("load_weights: missing tensor " + key);
        if (it->second.rows != want_rows || it->second.cols != want_cols)
            throw std::runtime_error("load_weights: tensor " + key + " is " +
                                     std::to_string(it->second.rows) + "x" +
                                     std::to_string(it->second.cols) + ", job expects " +
                                     std::to_string(want_rows) + "x" + std::to_string(want_cols));
        return it->second;
    };
    const std::size_t d = static_cast<std::size_t>(job.d_model);
    const std::size_t dk = static_cast<std::size_t>(job.d_k);

    std::vector<LayerWeights> out(static_cast<std::size_t>(job.n_layers));
    for (int l = 0; l < job.n_layers; ++l) {
        LayerWeights& lw = out[static_cast<std::size_t>(l)];
        const std::string p = "l" + std::to_string(l) + ".";
        for (int h = 0; h < job.n_heads; ++h) {
            const std::string hp = p + "h" + std::to_string(h) + ".";
            lw.w_q.push_back(fetch(hp + "wq", dk, d));
            lw.w_k.push_back(fetch(hp + "wk", dk, d));
            lw.w_v.push_back(fetch(hp + "wv", dk, d));
        }
        lw.w_o = fetch(p + "wo", d, d);
        lw.ffn_w1 = fetch(p + "ffn_w1", d, 4 * d);
        lw.ffn_w2 = fetch(p + "ffn_w2", 4 * d, d);
        lw.ln1_gamma = fetch(p + "ln1_gamma", 1, d).data;
        lw.ln1_beta = fetch(p + "ln1_beta", 1, d).data;
        lw.ln2_gamma = fetch(p + "ln2_gamma", 1, d).data;
        lw.ln2_beta = fetch(p + "ln2_beta", 1, d).data;
    }
    return out;
}

namespace {

const StagePlan kStagePlans[] = {
    {StageKind::ScaledQuery, "X", "W_Q^T", "1/sqrt(d_k)", BgKind::Static, XbarConfig::Either},
    {StageKind::Score, "R1", "W_K", "X^T", BgKind::Dynamic, XbarConfig::A},
    {StageKind::ValueAgg, "X", "W_V^T", "Score", BgKind::Dynamic, XbarConfig::B},
};

}  // namespace

const StagePlan& stage_plan(StageKind stage) {
    for (const StagePlan& p : kStagePlans)
        if (p.stage == stage) return p;
    throw std::logic_error("stage_plan: unknown stage");
}

StageTrace& StageTrace::operator+=(const StageTrace& o) {
    array_reads += o.array_reads;
    cell_reads += o.cell_reads;
    adc_conversions += o.adc_conversions;
    dac_conversions += o.dac_conversions;
    cells_written += o.cells_written;
    write_pulses += o.write_pulses;
    cycles += o.cycles;
    sfu_elem_ops += o.sfu_elem_ops;
    buffer_bytes += o.buffer_bytes;
    static_cells += o.static_cells;
    bg_rows = std::max(bg_rows, o.bg_rows);
    bg_cols = std::max(bg_cols, o.bg_cols);
    bg_cycles += o.bg_cycles;
    dynamic_bg = dynamic_bg || o.dynamic_bg;
    return *this;
}

StageTrace& RunTrace::at(const std::string& stage, std::size_t head, std::size_t n_heads) {
    std::vector<StageTrace>& v = stages[stage];
    if (v.size() < n_heads) v.resize(n_heads);
    return v[head];
}

std::uint64_t RunTrace::total(std::uint64_t StageTrace::*field) const {
    std::uint64_t acc = 0;
    for (const auto& [name, heads] : stages)
        for (const StageTrace& t : heads) acc += t.*field;
    return acc;
}

PipelineConfig ideal_config() {
    PipelineConfig cfg;
    cfg.scheme.input_bits = 30;
    cfg.scheme.weight_bits = 30;
    cfg.scheme.bits_per_cell = 30;  // single plane
    cfg.scheme.adc_bits = 44;
    cfg.scheme.dac_bits = 30;
    cfg.scheme.bit_serial_input = false;
    cfg.periph.adc_bits = 44;
    cfg.periph.dac_bits = 30;
    cfg.fixed_point_sfu = false;
    return cfg;
}

// ---------------------------------------------------------------------------
// internal read machinery
// ---------------------------------------------------------------------------

namespace {

// Weight tensor placed on positive/negative conductance arrays, one plane per
// cell digit, rows split into subarray-sized chunks.
struct MappedWeight {
    struct Chunk {
        std::size_t row0 = 0, nrows = 0;
        std::vector<Mat> pos_g, neg_g;  // per plane, nrows x cols (uS)
    };
    std::vector<Chunk> chunks;
    double scale = 1.0;   // weight quantizer scale
    int planes = 1;
    int bits_per_cell = 2;
    std::size_t rows = 0, cols = 0;
    double slope = 1.0;   // uS per digit level
    std::uint64_t total_cells = 0;
};

MappedWeight map_weight(const Mat& w, const PipelineConfig& cfg, WriteLog* runtime_writes,
                        StageTrace* t) {
    const QuantScheme& s = cfg.scheme;
    const DeviceParams& dev = cfg.device;
    const QuantTensor qw = quantize(w, calibrate_scale(w, s.weight_bits), s.weight_bits);
    const CellDecomposition dec = decompose_cells(qw, s.bits_per_cell);

    MappedWeight mw;
    mw.scale = qw.scale;
    mw.planes = static_cast<int>(dec.planes.size());
    mw.bits_per_cell = s.bits_per_cell;
    mw.rows = w.rows;
    mw.cols = w.cols;
    mw.slope = (dev.band_hi_us - dev.band_lo_us) /
               static_cast<double>((std::int64_t{1} << s.bits_per_cell) - 1);

    const std::size_t sub_rows = static_cast<std::size_t>(cfg.subarray_rows);
    for (std::size_t r0 = 0; r0 < w.rows; r0 += sub_rows) {
        MappedWeight::Chunk ch;
        ch.row0 = r0;
        ch.nrows = std::min(sub_rows, w.rows - r0);
        for (int p = 0; p < mw.planes; ++p) {
            Mat pos(ch.nrows, w.cols), neg(ch.nrows, w.cols);
            for (std::size_t r = 0; r < ch.nrows; ++r)
                for (std::size_t c = 0; c < w.cols; ++c) {
                    const std::int64_t digit = dec.planes[static_cast<std::size_t>(p)](r0 + r, c);
                    const bool is_neg = dec.sign_plane(r0 + r, c) < 0;
                    pos(r, c) = map_to_conductance(is_neg ? 0 : digit, s.bits_per_cell,
                                                   dev.band_lo_us, dev.band_hi_us);
                    neg(r, c) = map_to_conductance(is_neg ? digit : 0, s.bits_per_cell,
                                                   dev.band_lo_us, dev.band_hi_us);
                }
            ch.pos_g.push_back(std::move(pos));
            ch.neg_g.push_back(std::move(neg));
        }
        mw.chunks.push_back(std::move(ch));
    }
    mw.total_cells = static_cast<std::uint64_t>(mw.rows) * mw.cols * mw.planes * 2;

    if (runtime_writes) {
        runtime_writes->cells += mw.total_cells;
        if (t) {
            t->cells_written += mw.total_cells;
            t->write_pulses += mw.rows;  // row-parallel programming
        }
    } else if (t) {
        t->static_cells += mw.total_cells;
    }
    return mw;
}

struct ReadContext {
    double v_lsb;           // volts per input code
    double i_lsb;           // uA per ADC code
    double full_scale_ua;   // shared by every chunk of the stage
    std::int64_t serial_factor;  // bit-serial cycle multiplier
};

// The auto full-scale tracks the maximum achievable column current of the
// array shape; a modulated pass can swing (1 + eta_max * v_bg_max) above the
// reference read, so trilinear stages get that headroom.
ReadContext make_context(const MappedWeight& mw, const PipelineConfig& cfg, bool modulated) {
    ReadContext ctx;
    ctx.v_lsb = cfg.periph.v_read / static_cast<double>(qmax(cfg.scheme.input_bits));
    const std::size_t fs_rows = std::min(mw.rows, static_cast<std::size_t>(cfg.subarray_rows));
    double fs = cfg.periph.adc_full_scale_ua;
    if (fs <= 0.0) {
        fs = static_cast<double>(fs_rows) * cfg.device.band_hi_us * cfg.periph.v_read;
        if (modulated) {
            const double eta_max = cfg.periph.per_cell_eta
                                       ? eta_bg(cfg.device.band_lo_us, cfg.device)
                                       : cfg.device.eta_bar;
            fs *= 1.0 + (eta_max + std::abs(cfg.analog_eta_offset)) * cfg.periph.v_bg_max;
        }
    }
    ctx.full_scale_ua = fs;
    ctx.i_lsb = ctx.full_scale_ua / static_cast<double>(qmax(cfg.periph.adc_bits));
    ctx.serial_factor = cfg.scheme.bit_serial_input ? cfg.scheme.input_bits : 1;
    return ctx;
}

std::int64_t readout_cycles(const MappedWeight& mw, const PipelineConfig& cfg,
                            const ReadContext& ctx, bool trilinear) {
    const std::size_t phys_cols = mw.cols * static_cast<std::size_t>(mw.planes);
    const std::size_t per_subarray = std::min(phys_cols, static_cast<std::size_t>(cfg.subarray_cols));
    return mux_cycles(per_subarray, cfg.periph.mux_ratio) * ctx.serial_factor * (trilinear ? 2 : 1);
}

// Fast equivalent of adc_quantize for the simulation hot path: clamp, then
// round half away from zero via trunc(x + copysign(0.5, x)). Identical codes
// for every representable input below 2^51.
inline std::int64_t fast_adc(double current, double code_scale, double lim) {
    double t = current * code_scale;
    t = std::clamp(t, -lim, lim);
    return static_cast<std::int64_t>(t + std::copysign(0.5, t));
}

// Reference (v_bg = 0) column currents of one input row, cached per chunk,
// plane and polarity; eta_base carries sum_r v*G*eta for the modulated pass.
struct RowBases {
    // [chunk][plane][polarity][col]
    std::vector<std::vector<std::array<std::vector<double>, 2>>> base;
    std::vector<std::vector<std::array<std::vector<double>, 2>>> eta_base;
    std::vector<std::vector<std::array<std::vector<std::int64_t>, 2>>> ref_codes;
};

RowBases compute_row_bases(const MappedWeight& mw, const std::vector<double>& v,
                           const PipelineConfig& cfg, const ReadContext& ctx) {
    RowBases rb;
    rb.base.resize(mw.chunks.size());
    rb.eta_base.resize(mw.chunks.size());
    rb.ref_codes.resize(mw.chunks.size());
    for (std::size_t c = 0; c < mw.chunks.size(); ++c) {
        const MappedWeight::Chunk& ch = mw.chunks[c];
        rb.base[c].resize(static_cast<std::size_t>(mw.planes));
        rb.eta_base[c].resize(static_cast<std::size_t>(mw.planes));
        rb.ref_codes[c].resize(static_cast<std::size_t>(mw.planes));
        for (int p = 0; p < mw.planes; ++p) {
            for (int pol = 0; pol < 2; ++pol) {
                const Mat& g = pol == 0 ? ch.pos_g[static_cast<std::size_t>(p)]
                                        : ch.neg_g[static_cast<std::size_t>(p)];
                std::vector<double> base(mw.cols, 0.0), etab(mw.cols, 0.0);
                for (std::size_t r = 0; r < ch.nrows; ++r) {
                    const double vr = v[ch.row0 + r];
                    if (vr == 0.0) continue;
                    const double* grow = g.row(r);
                    for (std::size_t col = 0; col < mw.cols; ++col) {
                        const double vg = vr * grow[col];
                        const double eta = (cfg.periph.per_cell_eta
                                                ? eta_bg(grow[col], cfg.device)
                                                : cfg.device.eta_bar) +
                                           cfg.analog_eta_offset;
                        base[col] += vg;
                        etab[col] += vg * eta;
                    }
                }
                const double lim = static_cast<double>(qmax(cfg.periph.adc_bits));
                const double code_scale = lim / ctx.full_scale_ua;
                std::vector<std::int64_t> refc(mw.cols);
                for (std::size_t col = 0; col < mw.cols; ++col)
                    refc[col] = fast_adc(base[col], code_scale, lim);
                rb.base[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)] =
                    std::move(base);
                rb.eta_base[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)] =
                    std::move(etab);
                rb.ref_codes[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)] =
                    std::move(refc);
            }
        }
    }
    return rb;
}

void dump_codes(const char* tag, const std::vector<std::int64_t>& codes,
                const PipelineConfig& cfg, const ReadContext& ctx) {
    if (!cfg.periph.debug_currents) return;
    std::ostream& os = *cfg.periph.debug_currents;
    os << tag;
    for (std::int64_t c : codes) os << '\t' << static_cast<double>(c) * ctx.i_lsb;
    os << '\n';
}

// dynamic_bg distinguishes per-token back-gate updates (score, value
// aggregation) from a static level held across the whole stage (scaled
// query), which switches its DAC once and draws no per-cycle drive energy.
void count_read(const MappedWeight& mw, const PipelineConfig& cfg, const ReadContext& ctx,
                bool trilinear, bool dynamic_bg, StageTrace* t) {
    if (!t) return;
    const std::uint64_t passes = trilinear ? 2 : 1;  // modulated + reference
    const std::uint64_t arrays = static_cast<std::uint64_t>(mw.chunks.size()) * mw.planes * 2;
    t->array_reads += arrays * passes;
    t->cell_reads += static_cast<std::uint64_t>(mw.rows) * mw.cols * mw.planes * 2 * passes;
    t->adc_conversions +=
        static_cast<std::uint64_t>(mw.cols) * mw.planes * 2 * mw.chunks.size() * passes;
    t->cycles += static_cast<std::uint64_t>(readout_cycles(mw, cfg, ctx, trilinear));
    if (dynamic_bg) {
        t->dynamic_bg = true;
        t->dac_conversions += static_cast<std::uint64_t>(mw.cols) * mw.planes * mw.chunks.size();
        t->bg_cols = std::max<std::uint64_t>(t->bg_cols, mw.cols * mw.planes * mw.chunks.size());
        t->bg_rows = std::max<std::uint64_t>(
            t->bg_rows, std::min(mw.rows, static_cast<std::size_t>(cfg.subarray_rows)));
        t->bg_cycles += 1;
    }
}

// Differential modulated read against the cached reference: returns the
// plane-recombined post-ADC code per logical column. bg_v is one voltage per
// logical column, or a single broadcast value.
std::vector<std::int64_t> modulated_read(const MappedWeight& mw, const RowBases& rb,
                                         const std::vector<double>& bg_v,
                                         const PipelineConfig& cfg, const ReadContext& ctx,
                                         bool dynamic_bg, StageTrace* t) {
    const double lim = static_cast<double>(qmax(cfg.periph.adc_bits));
    const double code_scale = lim / ctx.full_scale_ua;
    const bool broadcast = bg_v.size() == 1;
    const double vb0 = bg_v[0];

    std::vector<std::int64_t> codes(mw.cols, 0);
    static thread_local std::vector<double> mod;
    mod.resize(mw.cols);
    for (std::size_t c = 0; c < mw.chunks.size(); ++c) {
        for (int p = 0; p < mw.planes; ++p) {
            const std::int64_t plane_weight = std::int64_t{1}
                                              << (static_cast<std::size_t>(p) * mw.bits_per_cell);
            for (int pol = 0; pol < 2; ++pol) {
                const double* base =
                    rb.base[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)].data();
                const double* etab =
                    rb.eta_base[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)]
                        .data();
                const std::int64_t* refc =
                    rb.ref_codes[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)]
                        .data();
                const std::int64_t sign = pol == 0 ? 1 : -1;
                if (broadcast) {
                    for (std::size_t col = 0; col < mw.cols; ++col)
                        mod[col] = base[col] + vb0 * etab[col];
                } else {
                    for (std::size_t col = 0; col < mw.cols; ++col)
                        mod[col] = base[col] + bg_v[col] * etab[col];
                }
                for (std::size_t col = 0; col < mw.cols; ++col)
                    codes[col] += sign * plane_weight *
                                  (fast_adc(mod[col], code_scale, lim) - refc[col]);
            }
        }
    }
    count_read(mw, cfg, ctx, /*trilinear=*/true, dynamic_bg, t);
    dump_codes("trilinear-diff", codes, cfg, ctx);
    return codes;
}

// Static two-operand read (projections, output layer, FFN).
std::vector<std::int64_t> bilinear_row_read(const MappedWeight& mw, const RowBases& rb,
                                            const PipelineConfig& cfg, const ReadContext& ctx,
                                            StageTrace* t) {
    std::vector<std::int64_t> codes(mw.cols, 0);
    for (std::size_t c = 0; c < mw.chunks.size(); ++c)
        for (int p = 0; p < mw.planes; ++p) {
            const std::int64_t plane_weight = std::int64_t{1}
                                              << (static_cast<std::size_t>(p) * mw.bits_per_cell);
            for (int pol = 0; pol < 2; ++pol) {
                const std::vector<std::int64_t>& refc =
                    rb.ref_codes[c][static_cast<std::size_t>(p)][static_cast<std::size_t>(pol)];
                const std::int64_t sign = pol == 0 ? 1 : -1;
                for (std::size_t col = 0; col < mw.cols; ++col)
                    codes[col] += sign * plane_weight * refc[col];
            }
        }
    count_read(mw, cfg, ctx, /*trilinear=*/false, /*dynamic_bg=*/false, t);
    dump_codes("bilinear", codes, cfg, ctx);
    return codes;
}

std::vector<double> row_voltages(const QuantTensor& q, std::size_t row, double v_lsb) {
    std::vector<double> v(q.data.cols);
    for (std::size_t c = 0; c < q.data.cols; ++c)
        v[c] = static_cast<double>(q.data(row, c)) * v_lsb;
    return v;
}

QuantTensor requantize(const Mat& x, int bits) {
    return quantize(x, calibrate_scale(x, bits), bits);
}

double bg_operand_scale(const Mat& x, double v_max) {
    const double m = x.max_abs();
    return m == 0.0 ? 1.0 : m / v_max;
}

// Quantized static matrix product with full-precision accumulation: the
// digital-baseline equivalent of one crossbar read sweep.
Mat digital_product(const QuantTensor& a, const QuantTensor& b) {
    if (a.data.cols != b.data.rows) throw std::invalid_argument("digital_product: shape mismatch");
    Mat out(a.data.rows, b.data.cols);
    for (std::size_t i = 0; i < a.data.rows; ++i)
        for (std::size_t k = 0; k < a.data.cols; ++k) {
            const std::int64_t aik = a.data(i, k);
            if (aik == 0) continue;
            for (std::size_t j = 0; j < b.data.cols; ++j)
                out(i, j) += static_cast<double>(aik * b.data(k, j));
        }
    for (double& v : out.data) v *= a.scale * b.scale;
    return out;
}

std::vector<double> pipeline_softmax_row(const std::vector<double>& row) {
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    std::vector<double> e(row.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        e[i] = std::exp(row[i] - m);
        sum += e[i];
    }
    for (double& v : e) v /= sum;
    return e;
}

// Softmax over the rows of the requantized score matrix; fixed-point LUT
// pipeline in hardware modes, double precision in the ideal preset.
Mat score_softmax(const Mat& r2, const PipelineConfig& cfg, const std::vector<bool>* row_mask,
                  StageTrace* t) {
    const QuantTensor r2q = requantize(r2, cfg.scheme.input_bits);
    Mat score(r2.rows, r2.cols);
    for (std::size_t i = 0; i < r2.rows; ++i) {
        if (cfg.fixed_point_sfu) {
            FixedVec row;
            row.bits = r2q.bits;
            row.scale = r2q.scale;
            for (std::size_t j = 0; j < r2.cols; ++j)
                row.data.push_back(static_cast<std::int32_t>(r2q.data(i, j)));
            if (row_mask)
                for (std::size_t j = 0; j < r2.cols; ++j)
                    if ((*row_mask)[i * r2.cols + j])
                        row.data[j] = static_cast<std::int32_t>(-qmax(r2q.bits));
            const FixedVec p = softmax_pipeline(row, cfg.sfu);
            for (std::size_t j = 0; j < r2.cols; ++j) score(i, j) = p.data[j] * p.scale;
        } else {
            std::vector<double> row(r2.cols);
            for (std::size_t j = 0; j < r2.cols; ++j)
                row[j] = static_cast<double>(r2q.data(i, j)) * r2q.scale;
            if (row_mask)
                for (std::size_t j = 0; j < r2.cols; ++j)
                    if ((*row_mask)[i * r2.cols + j]) row[j] = -1e30;
            const std::vector<double> p = pipeline_softmax_row(row);
            for (std::size_t j = 0; j < r2.cols; ++j) score(i, j) = p[j];
        }
        if (t) t->sfu_elem_ops += r2.cols;
    }
    return score;
}

}  // namespace

// ---------------------------------------------------------------------------
// trilinear stages
// ---------------------------------------------------------------------------

Mat stage1_scaled_query(const QuantTensor& xq, const Mat& w_q, const PipelineConfig& cfg,
                        StageTrace* trace) {
    const std::size_t n = xq.data.rows;
    const std::size_t d_k = w_q.rows;
    const MappedWeight mw = map_weight(transpose(w_q), cfg, nullptr, trace);
    const ReadContext ctx = make_context(mw, cfg, /*modulated=*/true);

    // fold 1/sqrt(d_k) into the static back-gate level; whatever does not fit
    // in the DAC range is applied digitally through the recovery factor
    const double eta = cfg.device.eta_bar;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
    const double v_req = std::clamp(inv_sqrt_dk / eta, -cfg.periph.v_bg_max, cfg.periph.v_bg_max);
    const double v_q = dac_quantize(v_req, cfg.periph.dac_bits, cfg.periph.v_bg_max);
    if (trace) trace->dac_conversions += 1;  // static level, converted once

    const double recovery =
        ctx.i_lsb / (ctx.v_lsb * mw.slope * eta * v_q) * xq.scale * mw.scale * inv_sqrt_dk;

    Mat r1(n, d_k);
    const std::vector<double> bg{v_q};
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> v = row_voltages(xq, i, ctx.v_lsb);
        const RowBases rb = compute_row_bases(mw, v, cfg, ctx);
        const std::vector<std::int64_t> codes =
            modulated_read(mw, rb, bg, cfg, ctx, /*dynamic_bg=*/false, trace);
        for (std::size_t j = 0; j < d_k; ++j) r1(i, j) = static_cast<double>(codes[j]) * recovery;
    }
    if (trace) trace->buffer_bytes += n * (xq.data.cols + d_k);
    return r1;
}

Mat stage2_score(const QuantTensor& r1q, const Mat& w_k, const Mat& x_bg,
                 const PipelineConfig& cfg, StageTrace* trace) {
    const std::size_t n = r1q.data.rows;
    if (x_bg.cols != w_k.cols)
        throw std::invalid_argument("stage2_score: back-gate operand width != stored columns");
    const MappedWeight mw = map_weight(w_k, cfg, nullptr, trace);
    const ReadContext ctx = make_context(mw, cfg, /*modulated=*/true);

    const double eta = cfg.device.eta_bar;
    const double bg_scale = bg_operand_scale(x_bg, cfg.periph.v_bg_max);
    const double recovery =
        ctx.i_lsb / (ctx.v_lsb * mw.slope * eta) * r1q.scale * mw.scale * bg_scale;

    // DAC-quantized back-gate voltage per token row of X
    Mat bg_v(x_bg.rows, x_bg.cols);
    for (std::size_t j = 0; j < x_bg.rows; ++j)
        for (std::size_t c = 0; c < x_bg.cols; ++c)
            bg_v(j, c) =
                dac_quantize(x_bg(j, c) / bg_scale, cfg.periph.dac_bits, cfg.periph.v_bg_max);

    Mat r2(n, x_bg.rows);
    std::vector<double> bg_col(x_bg.cols);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> v = row_voltages(r1q, i, ctx.v_lsb);
        const RowBases rb = compute_row_bases(mw, v, cfg, ctx);
        for (std::size_t j = 0; j < x_bg.rows; ++j) {
            if (cfg.causal_mask && j > i) {
                r2(i, j) = 0.0;  // masked: back-gate line held at 0 V, no read issued
                continue;
            }
            std::copy(bg_v.row(j), bg_v.row(j) + x_bg.cols, bg_col.begin());
            const std::vector<std::int64_t> codes =
                modulated_read(mw, rb, bg_col, cfg, ctx, /*dynamic_bg=*/true, trace);
            std::int64_t acc = 0;  // intra-crossbar addition over every column
            for (std::int64_t c : codes) acc += c;
            r2(i, j) = static_cast<double>(acc) * recovery;
        }
    }
    if (trace) trace->buffer_bytes += n * (r1q.data.cols + x_bg.rows) + x_bg.rows * x_bg.cols;
    return r2;
}

Mat stage3_value_agg(const Mat& score, const QuantTensor& xq, const Mat& w_v,
                     const PipelineConfig& cfg, StageTrace* trace) {
    const std::size_t n = xq.data.rows;
    if (score.rows != score.cols || score.cols != n)
        throw std::invalid_argument("stage3_value_agg: score must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += score(i, j);
        const double slack = std::max(0.1, 4.0 * static_cast<double>(n) / 512.0);
        if (std::abs(s - 1.0) > slack)
            throw std::invalid_argument("stage3_value_agg: score rows must sum to 1");
    }

    const std::size_t d_k = w_v.rows;
    const MappedWeight mw = map_weight(transpose(w_v), cfg, nullptr, trace);
    const ReadContext ctx = make_context(mw, cfg, /*modulated=*/true);

    const double eta = cfg.device.eta_bar;
    const double bg_scale = bg_operand_scale(score, cfg.periph.v_bg_max);
    const double recovery =
        ctx.i_lsb / (ctx.v_lsb * mw.slope * eta) * xq.scale * mw.scale * bg_scale;

    // all crossbars hold identical W_V^T; crossbar i keeps X row i applied
    std::vector<RowBases> bases;
    bases.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        bases.push_back(compute_row_bases(mw, row_voltages(xq, i, ctx.v_lsb), cfg, ctx));

    Mat out(n, d_k);
    for (std::size_t t_row = 0; t_row < n; ++t_row) {
        std::vector<std::int64_t> acc(d_k, 0);  // inter-crossbar addition
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.causal_mask && i > t_row) continue;  // masked: back gate at 0 V
            const double vb = dac_quantize(score(t_row, i) / bg_scale, cfg.periph.dac_bits,
                                           cfg.periph.v_bg_max);
            const std::vector<double> bg{vb};
            const std::vector<std::int64_t> codes =
                modulated_read(mw, bases[i], bg, cfg, ctx, /*dynamic_bg=*/true, trace);
            for (std::size_t j = 0; j < d_k; ++j) acc[j] += codes[j];
        }
        for (std::size_t j = 0; j < d_k; ++j)
            out(t_row, j) = static_cast<double>(acc[j]) * recovery;
    }
    if (trace) trace->buffer_bytes += n * (xq.data.cols + d_k) + n * n;
    return out;
}

// ---------------------------------------------------------------------------
// per-layer executors
// ---------------------------------------------------------------------------

namespace {

// Static-array projection: rows of q_in against stored weights (no modulation).
Mat static_projection(const QuantTensor& q_in, const Mat& stored, const PipelineConfig& cfg,
                      StageTrace* trace) {
    const MappedWeight mw = map_weight(stored, cfg, nullptr, trace);
    const ReadContext ctx = make_context(mw, cfg, /*modulated=*/false);
    const double recovery = ctx.i_lsb / (ctx.v_lsb * mw.slope) * q_in.scale * mw.scale;
    Mat out(q_in.data.rows, stored.cols);
    for (std::size_t i = 0; i < q_in.data.rows; ++i) {
        const RowBases rb = compute_row_bases(mw, row_voltages(q_in, i, ctx.v_lsb), cfg, ctx);
        const std::vector<std::int64_t> codes = bilinear_row_read(mw, rb, cfg, ctx, trace);
        for (std::size_t j = 0; j < stored.cols; ++j)
            out(i, j) = static_cast<double>(codes[j]) * recovery;
    }
    if (trace) trace->buffer_bytes += q_in.data.rows * (q_in.data.cols + stored.cols);
    return out;
}

// Scratch-array product for the bilinear mode: the stored operand is dynamic
// data programmed at inference time, so its cells land in the write log.
Mat scratch_projection(const QuantTensor& q_in, const Mat& stored, const PipelineConfig& cfg,
                       WriteLog* writes, StageTrace* program_trace, StageTrace* read_trace) {
    const MappedWeight mw = map_weight(stored, cfg, writes, program_trace);
    const ReadContext ctx = make_context(mw, cfg, /*modulated=*/false);
    const double recovery = ctx.i_lsb / (ctx.v_lsb * mw.slope) * q_in.scale * mw.scale;
    Mat out(q_in.data.rows, stored.cols);
    for (std::size_t i = 0; i < q_in.data.rows; ++i) {
        const RowBases rb = compute_row_bases(mw, row_voltages(q_in, i, ctx.v_lsb), cfg, ctx);
        const std::vector<std::int64_t> codes = bilinear_row_read(mw, rb, cfg, ctx, read_trace);
        for (std::size_t j = 0; j < stored.cols; ++j)
            out(i, j) = static_cast<double>(codes[j]) * recovery;
    }
    if (read_trace) read_trace->buffer_bytes += q_in.data.rows * (q_in.data.cols + stored.cols);
    return out;
}

std::vector<bool> causal_row_mask(std::size_t n) {
    std::vector<bool> mask(n * n, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) mask[i * n + j] = true;
    return mask;
}

Mat mhsa_trilinear(const Mat& x, const LayerWeights& lw, const PipelineConfig& cfg,
                   RunTrace& trace) {
    const std::size_t n = x.rows;
    const std::size_t h = lw.w_q.size();
    const std::size_t d_k = lw.w_q[0].rows;
    const QuantTensor xq = requantize(x, cfg.scheme.input_bits);
    if (cfg.observe_quant) cfg.observe_quant->push_back(xq);

    Mat heads(n, h * d_k);
    const std::vector<bool> mask = cfg.causal_mask ? causal_row_mask(n) : std::vector<bool>{};
    for (std::size_t head = 0; head < h; ++head) {
        if (cfg.observe_quant)
            cfg.observe_quant->push_back(
                quantize(lw.w_q[head], calibrate_scale(lw.w_q[head], cfg.scheme.weight_bits),
                         cfg.scheme.weight_bits));
        const Mat r1 = stage1_scaled_query(xq, lw.w_q[head], cfg,
                                           &trace.at("scaled_query", head, h));
        const QuantTensor r1q = requantize(r1, cfg.scheme.input_bits);
        const Mat r2 = stage2_score(r1q, lw.w_k[head], x, cfg, &trace.at("score", head, h));
        const Mat score = score_softmax(r2, cfg, cfg.causal_mask ? &mask : nullptr,
                                        &trace.at("softmax", head, h));
        const Mat o = stage3_value_agg(score, xq, lw.w_v[head], cfg,
                                       &trace.at("value_agg", head, h));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d_k; ++j) heads(i, head * d_k + j) = o(i, j);
    }

    const QuantTensor hq = requantize(heads, cfg.scheme.input_bits);
    return static_projection(hq, lw.w_o, cfg, &trace.at("output_proj", 0, 1));
}

Mat mhsa_bilinear(const Mat& x, const LayerWeights& lw, const PipelineConfig& cfg,
                  WriteLog& writes, RunTrace& trace) {
    const std::size_t n = x.rows;
    const std::size_t h = lw.w_q.size();
    const std::size_t d_k = lw.w_q[0].rows;
    const QuantTensor xq = requantize(x, cfg.scheme.input_bits);
    if (cfg.observe_quant) cfg.observe_quant->push_back(xq);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

    Mat heads(n, h * d_k);
    for (std::size_t head = 0; head < h; ++head) {
        if (cfg.observe_quant)
            cfg.observe_quant->push_back(
                quantize(lw.w_q[head], calibrate_scale(lw.w_q[head], cfg.scheme.weight_bits),
                         cfg.scheme.weight_bits));
        // static projection arrays
        Mat q = static_projection(xq, transpose(lw.w_q[head]), cfg, &trace.at("q_proj", head, h));
        const Mat k = static_projection(xq, transpose(lw.w_k[head]), cfg, &trace.at("k_proj", head, h));
        const Mat v = static_projection(xq, transpose(lw.w_v[head]), cfg, &trace.at("v_proj", head, h));

        // separate digital scaling step, then requantize
        for (double& e : q.data) e *= inv_sqrt_dk;
        const QuantTensor qq = requantize(q, cfg.scheme.input_bits);

        // K^T programmed into a scratch array (the runtime write burden)
        const Mat r2 = scratch_projection(qq, transpose(k), cfg, &writes,
                                          &trace.at("k_program", head, h),
                                          &trace.at("score", head, h));
        const Mat score = score_softmax(r2, cfg, nullptr, &trace.at("softmax", head, h));

        // V programmed into a scratch array
        const QuantTensor sq = requantize(score, cfg.scheme.input_bits);
        const Mat o = scratch_projection(sq, v, cfg, &writes, &trace.at("v_program", head, h),
                                         &trace.at("value_agg", head, h));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d_k; ++j) heads(i, head * d_k + j) = o(i, j);
    }

    const QuantTensor hq = requantize(heads, cfg.scheme.input_bits);
    return static_projection(hq, lw.w_o, cfg, &trace.at("output_proj", 0, 1));
}

Mat mhsa_digital(const Mat& x, const LayerWeights& lw, const PipelineConfig& cfg,
                 RunTrace& trace) {
    const std::size_t n = x.rows;
    const std::size_t h = lw.w_q.size();
    const std::size_t d_k = lw.w_q[0].rows;
    const QuantTensor xq = requantize(x, cfg.scheme.input_bits);
    if (cfg.observe_quant) cfg.observe_quant->push_back(xq);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

    Mat heads(n, h * d_k);
    for (std::size_t head = 0; head < h; ++head) {
        const QuantTensor wq = quantize(lw.w_q[head],
                                        calibrate_scale(lw.w_q[head], cfg.scheme.weight_bits),
                                        cfg.scheme.weight_bits);
        if (cfg.observe_quant) cfg.observe_quant->push_back(wq);
        const QuantTensor wk = quantize(lw.w_k[head],
                                        calibrate_scale(lw.w_k[head], cfg.scheme.weight_bits),
                                        cfg.scheme.weight_bits);
        const QuantTensor wv = quantize(lw.w_v[head],
                                        calibrate_scale(lw.w_v[head], cfg.scheme.weight_bits),
                                        cfg.scheme.weight_bits);

        QuantTensor wqt = wq, wkt = wk, wvt = wv;
        wqt.data = IMat(wq.data.cols, wq.data.rows);
        for (std::size_t r = 0; r < wq.data.rows; ++r)
            for (std::size_t c = 0; c < wq.data.cols; ++c) wqt.data(c, r) = wq.data(r, c);
        wkt.data = IMat(wk.data.cols, wk.data.rows);
        for (std::size_t r = 0; r < wk.data.rows; ++r)
            for (std::size_t c = 0; c < wk.data.cols; ++c) wkt.data(c, r) = wk.data(r, c);
        wvt.data = IMat(wv.data.cols, wv.data.rows);
        for (std::size_t r = 0; r < wv.data.rows; ++r)
            for (std::size_t c = 0; c < wv.data.cols; ++c) wvt.data(c, r) = wv.data(r, c);

        Mat q = digital_product(xq, wqt);
        const Mat k = digital_product(xq, wkt);
        const Mat v = digital_product(xq, wvt);
        for (double& e : q.data) e *= inv_sqrt_dk;

        const QuantTensor qq = requantize(q, cfg.scheme.input_bits);
        const QuantTensor kq = requantize(k, cfg.scheme.input_bits);
        QuantTensor kqt = kq;
        kqt.data = IMat(kq.data.cols, kq.data.rows);
        for (std::size_t r = 0; r < kq.data.rows; ++r)
            for (std::size_t c = 0; c < kq.data.cols; ++c) kqt.data(c, r) = kq.data(r, c);
        const Mat r2 = digital_product(qq, kqt);

        const Mat score = score_softmax(r2, cfg, nullptr, &trace.at("softmax", head, h));
        const QuantTensor sq = requantize(score, cfg.scheme.input_bits);
        const QuantTensor vq = requantize(v, cfg.scheme.input_bits);
        const Mat o = digital_product(sq, vq);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d_k; ++j) heads(i, head * d_k + j) = o(i, j);
    }

    const QuantTensor hq = requantize(heads, cfg.scheme.input_bits);
    const QuantTensor woq = quantize(lw.w_o, calibrate_scale(lw.w_o, cfg.scheme.weight_bits),
                                     cfg.scheme.weight_bits);
    return digital_product(hq, woq);
}

Mat run_mhsa_layer(const Mat& x, const LayerWeights& lw, const PipelineConfig& cfg, Mode mode,
                   WriteLog& writes, RunTrace& trace) {
    switch (mode) {
        case Mode::CimTrilinear: return mhsa_trilinear(x, lw, cfg, trace);
        case Mode::CimBilinear: return mhsa_bilinear(x, lw, cfg, writes, trace);
        case Mode::QuantizedDigital: return mhsa_digital(x, lw, cfg, trace);
    }
    throw std::logic_error("run_mhsa_layer: unknown mode");
}

RunResult run_layers(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                     const PipelineConfig& cfg, Mode mode) {
    validate(job);
    validate(cfg.scheme);
    validate(cfg.device);
    if (weights.size() != static_cast<std::size_t>(job.n_layers))
        throw std::invalid_argument("run: one LayerWeights entry per layer required");

    RunResult res;
    res.trace.peak_intermediate_matrices = mode == Mode::CimTrilinear ? 1 : 3;
    Mat x = generate_input(job);
    for (int l = 0; l < job.n_layers; ++l)
        x = run_mhsa_layer(x, weights[static_cast<std::size_t>(l)], cfg, mode, res.writes,
                           res.trace);
    res.output = std::move(x);
    return res;
}

}  // namespace

Mat run_reference_attention(const AttentionJob& job, const std::vector<LayerWeights>& weights) {
    validate(job);
    if (weights.size() != static_cast<std::size_t>(job.n_layers))
        throw std::invalid_argument("run_reference_attention: weights per layer required");
    const std::size_t n = static_cast<std::size_t>(job.n_tokens);
    const std::size_t d_k = static_cast<std::size_t>(job.d_k);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

    Mat x = generate_input(job);
    for (const LayerWeights& lw : weights) {
        Mat heads(n, lw.w_q.size() * d_k);
        for (std::size_t head = 0; head < lw.w_q.size(); ++head) {
            const Mat q = matmul(x, transpose(lw.w_q[head]));
            const Mat k = matmul(x, transpose(lw.w_k[head]));
            const Mat v = matmul(x, transpose(lw.w_v[head]));
            Mat scores = matmul(q, transpose(k));
            for (double& s : scores.data) s *= inv_sqrt_dk;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> row(scores.row(i), scores.row(i) + n);
                const std::vector<double> p = pipeline_softmax_row(row);
                for (std::size_t j = 0; j < d_k; ++j) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < n; ++t) acc += p[t] * v(t, j);
                    heads(i, head * d_k + j) = acc;
                }
            }
        }
        x = matmul(heads, lw.w_o);
    }
    return x;
}

RunResult run_digital_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                           const PipelineConfig& cfg) {
    return run_layers(job, weights, cfg, Mode::QuantizedDigital);
}

RunResult run_bilinear_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                            const PipelineConfig& cfg) {
    return run_layers(job, weights, cfg, Mode::CimBilinear);
}

RunResult run_trilinear_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                             const PipelineConfig& cfg) {
    return run_layers(job, weights, cfg, Mode::CimTrilinear);
}

RunResult run_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                   const PipelineConfig& cfg) {
    return run_layers(job, weights, cfg, job.mode);
}

// ---------------------------------------------------------------------------
// encoder block
// ---------------------------------------------------------------------------

namespace {

Mat layernorm_rows(const Mat& x, const std::vector<double>& gamma, const std::vector<double>& beta,
                   const PipelineConfig& cfg, StageTrace* t) {
    Mat out(x.rows, x.cols);
    if (cfg.fixed_point_sfu) {
        const double xs = calibrate_scale(x, cfg.scheme.input_bits);
        Mat gm(1, gamma.size()), bm(1, beta.size());
        gm.data = gamma;
        bm.data = beta;
        const FixedVec gq = to_fixed(gamma, calibrate_scale(gm, cfg.scheme.weight_bits),
                                     cfg.scheme.weight_bits);
        const FixedVec bq = to_fixed(beta, std::max(calibrate_scale(bm, cfg.scheme.weight_bits),
                                                    1e-12),
                                     cfg.scheme.weight_bits);
        for (std::size_t i = 0; i < x.rows; ++i) {
            std::vector<double> row(x.row(i), x.row(i) + x.cols);
            const FixedVec xf = to_fixed(row, xs, cfg.scheme.input_bits);
            const FixedVec y = layernorm_pipeline(xf, gq, bq, cfg.sfu);
            for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = y.data[j] * y.scale;
            if (t) t->sfu_elem_ops += x.cols;
        }
    } else {
        for (std::size_t i = 0; i < x.rows; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) mean += x(i, j);
            mean /= static_cast<double>(x.cols);
            double var = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
            var /= static_cast<double>(x.cols);
            const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
            for (std::size_t j = 0; j < x.cols; ++j)
                out(i, j) = (x(i, j) - mean) * inv * gamma[j] + beta[j];
            if (t) t->sfu_elem_ops += x.cols;
        }
    }
    return out;
}

Mat gelu_rows(const Mat& x, const PipelineConfig& cfg, StageTrace* t) {
    Mat out(x.rows, x.cols);
    if (cfg.fixed_point_sfu) {
        const double xs = calibrate_scale(x, cfg.scheme.input_bits);
        for (std::size_t i = 0; i < x.rows; ++i) {
            std::vector<double> row(x.row(i), x.row(i) + x.cols);
            const FixedVec xf = to_fixed(row, xs, cfg.scheme.input_bits);
            const FixedVec y = gelu_pipeline(xf, cfg.sfu);
            for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = y.data[j] * y.scale;
            if (t) t->sfu_elem_ops += x.cols;
        }
    } else {
        for (std::size_t i = 0; i < x.data.size(); ++i)
            out.data[i] = x.data[i] / (1.0 + std::exp(-1.702 * x.data[i]));
        if (t) t->sfu_elem_ops += x.data.size();
    }
    return out;
}

Mat ffn_forward(const Mat& z, const LayerWeights& lw, const PipelineConfig& cfg, Mode mode,
                RunTrace& trace) {
    StageTrace* t = &trace.at("ffn", 0, 1);
    const QuantTensor zq = requantize(z, cfg.scheme.input_bits);
    Mat h1;
    if (mode == Mode::QuantizedDigital) {
        const QuantTensor w1q = quantize(lw.ffn_w1,
                                         calibrate_scale(lw.ffn_w1, cfg.scheme.weight_bits),
                                         cfg.scheme.weight_bits);
        h1 = digital_product(zq, w1q);
    } else {
        h1 = static_projection(zq, lw.ffn_w1, cfg, t);
    }
    const Mat g = gelu_rows(h1, cfg, &trace.at("gelu", 0, 1));
    const QuantTensor gq = requantize(g, cfg.scheme.input_bits);
    if (mode == Mode::QuantizedDigital) {
        const QuantTensor w2q = quantize(lw.ffn_w2,
                                         calibrate_scale(lw.ffn_w2, cfg.scheme.weight_bits),
                                         cfg.scheme.weight_bits);
        return digital_product(gq, w2q);
    }
    return static_projection(gq, lw.ffn_w2, cfg, t);
}

}  // namespace

RunResult run_encoder_block(const AttentionJob& job, const LayerWeights& lw,
                            const PipelineConfig& cfg) {
    validate(job);
    RunResult res;
    res.trace.peak_intermediate_matrices = job.mode == Mode::CimTrilinear ? 1 : 3;
    const Mat x = generate_input(job);

    const Mat mhsa = run_mhsa_layer(x, lw, cfg, job.mode, res.writes, res.trace);
    Mat z(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) z.data[i] = x.data[i] + mhsa.data[i];
    z = layernorm_rows(z, lw.ln1_gamma, lw.ln1_beta, cfg, &res.trace.at("layernorm", 0, 1));

    const Mat f = ffn_forward(z, lw, cfg, job.mode, res.trace);
    Mat y(z.rows, z.cols);
    for (std::size_t i = 0; i < z.data.size(); ++i) y.data[i] = z.data[i] + f.data[i];
    res.output = layernorm_rows(y, lw.ln2_gamma, lw.ln2_beta, cfg, &res.trace.at("layernorm", 0, 1));
    return res;
}

}  // namespace dgcim
