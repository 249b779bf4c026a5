#include "dgcim/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace dgcim {

const char* const kToolVersion = "0.1.0";

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (...) {
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (...) {
        throw std::invalid_argument("config: key '" + key + "' expects an unsigned integer, got '" +
                                    v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return r;
    } catch (...) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, sep)) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = {
        {"device.alpha", [](auto& c, auto& k, auto& v) { c.device.alpha = parse_double(k, v); }},
        {"device.m_coeff", [](auto& c, auto& k, auto& v) { c.device.m_coeff = parse_double(k, v); }},
        {"device.band_lo_us",
         [](auto& c, auto& k, auto& v) { c.device.band_lo_us = parse_double(k, v); }},
        {"device.band_hi_us",
         [](auto& c, auto& k, auto& v) { c.device.band_hi_us = parse_double(k, v); }},
        {"device.eta_bar", [](auto& c, auto& k, auto& v) { c.device.eta_bar = parse_double(k, v); }},
        {"device.mu0", [](auto& c, auto& k, auto& v) { c.device.mu0 = parse_double(k, v); }},
        {"device.eta_method",
         [](auto& c, auto& k, auto& v) {
             if (v != "fixed-constant" && v != "uniform-grid-mean" && v != "endpoint-mean")
                 throw std::invalid_argument("config: key '" + k + "' has unknown method '" + v +
                                             "'");
             c.eta_method = v;
         }},
        {"quant.input_bits",
         [](auto& c, auto& k, auto& v) { c.quant.input_bits = parse_int(k, v); }},
        {"quant.weight_bits",
         [](auto& c, auto& k, auto& v) { c.quant.weight_bits = parse_int(k, v); }},
        {"quant.adc_bits", [](auto& c, auto& k, auto& v) { c.quant.adc_bits = parse_int(k, v); }},
        {"quant.dac_bits", [](auto& c, auto& k, auto& v) { c.quant.dac_bits = parse_int(k, v); }},
        {"quant.bits_per_cell",
         [](auto& c, auto& k, auto& v) { c.quant.bits_per_cell = parse_int(k, v); }},
        {"quant.bit_serial_input",
         [](auto& c, auto& k, auto& v) { c.quant.bit_serial_input = parse_bool(k, v); }},
        {"crossbar.subarray_rows",
         [](auto& c, auto& k, auto& v) { c.subarray_rows = parse_int(k, v); }},
        {"crossbar.subarray_cols",
         [](auto& c, auto& k, auto& v) { c.subarray_cols = parse_int(k, v); }},
        {"crossbar.mux_ratio", [](auto& c, auto& k, auto& v) { c.mux_ratio = parse_int(k, v); }},
        {"crossbar.v_read", [](auto& c, auto& k, auto& v) { c.v_read = parse_double(k, v); }},
        {"crossbar.v_bg_max", [](auto& c, auto& k, auto& v) { c.v_bg_max = parse_double(k, v); }},
        {"crossbar.adc_full_scale_ua",
         [](auto& c, auto& k, auto& v) { c.adc_full_scale_ua = parse_double(k, v); }},
        {"crossbar.per_cell_eta",
         [](auto& c, auto& k, auto& v) { c.per_cell_eta = parse_bool(k, v); }},
        {"energy.read_energy_per_cell_fj",
         [](auto& c, auto& k, auto& v) { c.energy.read_energy_per_cell_fj = parse_double(k, v); }},
        {"energy.write_energy_per_cell_pj",
         [](auto& c, auto& k, auto& v) { c.energy.write_energy_per_cell_pj = parse_double(k, v); }},
        {"energy.read_latency_ns",
         [](auto& c, auto& k, auto& v) { c.energy.read_latency_ns = parse_double(k, v); }},
        {"energy.write_latency_ns",
         [](auto& c, auto& k, auto& v) { c.energy.write_latency_ns = parse_double(k, v); }},
        {"energy.dac_switch_energy_fj",
         [](auto& c, auto& k, auto& v) { c.energy.dac_switch_energy_fj = parse_double(k, v); }},
        {"energy.driver_energy_fj",
         [](auto& c, auto& k, auto& v) { c.energy.driver_energy_fj = parse_double(k, v); }},
        {"energy.wire_cap_per_um_ff",
         [](auto& c, auto& k, auto& v) { c.energy.wire_cap_per_um_ff = parse_double(k, v); }},
        {"energy.bg_line_length_per_col_um",
         [](auto& c, auto& k, auto& v) {
             c.energy.bg_line_length_per_col_um = parse_double(k, v);
         }},
        {"energy.gate_cap_per_cell_ff",
         [](auto& c, auto& k, auto& v) { c.energy.gate_cap_per_cell_ff = parse_double(k, v); }},
        {"energy.v_swing", [](auto& c, auto& k, auto& v) { c.energy.v_swing = parse_double(k, v); }},
        {"energy.sfu_energy_per_op_fj",
         [](auto& c, auto& k, auto& v) { c.energy.sfu_energy_per_op_fj = parse_double(k, v); }},
        {"energy.buffer_energy_per_byte_fj",
         [](auto& c, auto& k, auto& v) { c.energy.buffer_energy_per_byte_fj = parse_double(k, v); }},
        {"energy.overlap_factor",
         [](auto& c, auto& k, auto& v) { c.energy.overlap_factor = parse_double(k, v); }},
        {"energy.cell_area_um2",
         [](auto& c, auto& k, auto& v) { c.energy.cell_area_um2 = parse_double(k, v); }},
        {"energy.bg_area_overhead",
         [](auto& c, auto& k, auto& v) { c.energy.bg_area_overhead = parse_double(k, v); }},
        {"energy.area_ceiling_mm2",
         [](auto& c, auto& k, auto& v) { c.energy.area_ceiling_mm2 = parse_double(k, v); }},
        {"job.n_tokens", [](auto& c, auto& k, auto& v) { c.job.n_tokens = parse_int(k, v); }},
        {"job.d_model", [](auto& c, auto& k, auto& v) { c.job.d_model = parse_int(k, v); }},
        {"job.d_k", [](auto& c, auto& k, auto& v) { c.job.d_k = parse_int(k, v); }},
        {"job.n_heads", [](auto& c, auto& k, auto& v) { c.job.n_heads = parse_int(k, v); }},
        {"job.n_layers", [](auto& c, auto& k, auto& v) { c.job.n_layers = parse_int(k, v); }},
        {"job.mode", [](auto& c, auto&, auto& v) { c.job.mode = mode_from_string(v); }},
        {"job.seed", [](auto& c, auto& k, auto& v) { c.job.seed = parse_u64(k, v); }},
        {"job.ideal_fidelity",
         [](auto& c, auto& k, auto& v) { c.ideal_fidelity = parse_bool(k, v); }},
        {"job.causal_mask", [](auto& c, auto& k, auto& v) { c.causal_mask = parse_bool(k, v); }},
        {"job.weights_path", [](auto& c, auto&, auto& v) { c.weights_path = v; }},
        {"sweep.seq",
         [](auto& c, auto& k, auto& v) {
             for (const std::string& t : split(v, ',')) c.sweep.seq_lengths.push_back(parse_int(k, t));
         }},
        {"sweep.subarray",
         [](auto& c, auto& k, auto& v) {
             for (const std::string& t : split(v, ','))
                 c.sweep.subarray_sizes.push_back(parse_int(k, t));
         }},
        {"sweep.bitcell_adc",
         [](auto& c, auto& k, auto& v) {
             for (const std::string& t : split(v, ',')) {
                 const auto colon = t.find(':');
                 if (colon == std::string::npos)
                     throw std::invalid_argument("config: key '" + k +
                                                 "' expects cell:adc pairs, got '" + t + "'");
                 c.sweep.bitcell_adc.emplace_back(parse_int(k, t.substr(0, colon)),
                                                  parse_int(k, t.substr(colon + 1)));
             }
         }},
        {"output.dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
        {"output.debug_currents",
         [](auto& c, auto& k, auto& v) { c.debug_currents = parse_bool(k, v); }},
        {"output.oracle_check",
         [](auto& c, auto& k, auto& v) {
             if (v != "auto" && v != "on" && v != "off")
                 throw std::invalid_argument("config: key '" + k + "' expects auto|on|off, got '" +
                                             v + "'");
             c.oracle_check = v;
         }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = key_table().find(key);
        if (it == key_table().end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
        it->second(cfg, key, value);
    }
    // schema-level validation before anything runs
    validate(cfg.device);
    validate(cfg.quant);
    validate(cfg.energy);
    validate(cfg.job);
    if (cfg.subarray_rows < 1 || cfg.subarray_cols < 1 || cfg.mux_ratio < 1)
        throw std::invalid_argument("config: crossbar dimensions must be >= 1");
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string canonical_config_text(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "device.alpha = " << fmt(c.device.alpha) << '\n'
       << "device.m_coeff = " << fmt(c.device.m_coeff) << '\n'
       << "device.band_lo_us = " << fmt(c.device.band_lo_us) << '\n'
       << "device.band_hi_us = " << fmt(c.device.band_hi_us) << '\n'
       << "device.eta_bar = " << fmt(c.device.eta_bar) << '\n'
       << "device.eta_method = " << c.eta_method << '\n'
       << "device.mu0 = " << fmt(c.device.mu0) << '\n'
       << "quant.input_bits = " << c.quant.input_bits << '\n'
       << "quant.weight_bits = " << c.quant.weight_bits << '\n'
       << "quant.adc_bits = " << c.quant.adc_bits << '\n'
       << "quant.dac_bits = " << c.quant.dac_bits << '\n'
       << "quant.bits_per_cell = " << c.quant.bits_per_cell << '\n'
       << "quant.bit_serial_input = " << (c.quant.bit_serial_input ? "true" : "false") << '\n'
       << "crossbar.subarray_rows = " << c.subarray_rows << '\n'
       << "crossbar.subarray_cols = " << c.subarray_cols << '\n'
       << "crossbar.mux_ratio = " << c.mux_ratio << '\n'
       << "crossbar.v_read = " << fmt(c.v_read) << '\n'
       << "crossbar.v_bg_max = " << fmt(c.v_bg_max) << '\n'
       << "crossbar.adc_full_scale_ua = " << fmt(c.adc_full_scale_ua) << '\n'
       << "crossbar.per_cell_eta = " << (c.per_cell_eta ? "true" : "false") << '\n'
       << "energy.read_energy_per_cell_fj = " << fmt(c.energy.read_energy_per_cell_fj) << '\n'
       << "energy.write_energy_per_cell_pj = " << fmt(c.energy.write_energy_per_cell_pj) << '\n'
       << "energy.read_latency_ns = " << fmt(c.energy.read_latency_ns) << '\n'
       << "energy.write_latency_ns = " << fmt(c.energy.write_latency_ns) << '\n'
       << "energy.dac_switch_energy_fj = " << fmt(c.energy.dac_switch_energy_fj) << '\n'
       << "energy.driver_energy_fj = " << fmt(c.energy.driver_energy_fj) << '\n'
       << "energy.wire_cap_per_um_ff = " << fmt(c.energy.wire_cap_per_um_ff) << '\n'
       << "energy.bg_line_length_per_col_um = " << fmt(c.energy.bg_line_length_per_col_um) << '\n'
       << "energy.gate_cap_per_cell_ff = " << fmt(c.energy.gate_cap_per_cell_ff) << '\n'
       << "energy.v_swing = " << fmt(c.energy.v_swing) << '\n'
       << "energy.sfu_energy_per_op_fj = " << fmt(c.energy.sfu_energy_per_op_fj) << '\n'
       << "energy.buffer_energy_per_byte_fj = " << fmt(c.energy.buffer_energy_per_byte_fj) << '\n'
       << "energy.overlap_factor = " << fmt(c.energy.overlap_factor) << '\n'
       << "energy.cell_area_um2 = " << fmt(c.energy.cell_area_um2) << '\n'
       << "energy.bg_area_overhead = " << fmt(c.energy.bg_area_overhead) << '\n'
       << "energy.area_ceiling_mm2 = " << fmt(c.energy.area_ceiling_mm2) << '\n'
       << "job.n_tokens = " << c.job.n_tokens << '\n'
       << "job.d_model = " << c.job.d_model << '\n'
       << "job.d_k = " << c.job.d_k << '\n'
       << "job.n_heads = " << c.job.n_heads << '\n'
       << "job.n_layers = " << c.job.n_layers << '\n'
       << "job.mode = " << mode_name(c.job.mode) << '\n'
       << "job.seed = " << c.job.seed << '\n'
       << "job.ideal_fidelity = " << (c.ideal_fidelity ? "true" : "false") << '\n'
       << "job.causal_mask = " << (c.causal_mask ? "true" : "false") << '\n'
       << "job.weights_path = " << c.weights_path << '\n';
    os << "sweep.seq =";
    for (int v : c.sweep.seq_lengths) os << ' ' << v;
    os << "\nsweep.subarray =";
    for (int v : c.sweep.subarray_sizes) os << ' ' << v;
    os << "\nsweep.bitcell_adc =";
    for (const auto& [b, a] : c.sweep.bitcell_adc) os << ' ' << b << ':' << a;
    // output.dir and debug_currents never affect simulation results, so they
    // stay out of the reproducibility fingerprint
    os << "\noutput.oracle_check = " << c.oracle_check << '\n';
    return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::uint64_t h = fnv1a64(canonical_config_text(cfg));
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

PipelineConfig make_pipeline_config(const ExperimentConfig& cfg) {
    PipelineConfig pc;
    if (cfg.ideal_fidelity) pc = ideal_config();
    else {
        pc.scheme = cfg.quant;
        pc.periph.adc_bits = cfg.quant.adc_bits;
        pc.periph.dac_bits = cfg.quant.dac_bits;
    }
    pc.device = cfg.device;
    if (cfg.eta_method != "fixed-constant") {
        const EtaAverage m = cfg.eta_method == "uniform-grid-mean" ? EtaAverage::UniformGridMean
                                                                   : EtaAverage::EndpointMean;
        pc.device.eta_bar = band_average_eta(cfg.device.band_lo_us, cfg.device.band_hi_us,
                                             cfg.device, m);
    }
    pc.periph.mux_ratio = cfg.mux_ratio;
    pc.periph.v_read = cfg.v_read;
    pc.periph.v_bg_max = cfg.v_bg_max;
    pc.periph.adc_full_scale_ua = cfg.adc_full_scale_ua;
    pc.periph.per_cell_eta = cfg.per_cell_eta;
    pc.periph.device = pc.device;
    pc.subarray_rows = cfg.subarray_rows;
    pc.subarray_cols = cfg.subarray_cols;
    pc.causal_mask = cfg.causal_mask;
    return pc;
}

RunManifest make_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& outputs) {
    RunManifest m;
    m.config_hash = config_hash(cfg);
    m.seed = cfg.job.seed;
    m.tool_version = kToolVersion;
    std::time_t t;
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e)
        t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    else
        t = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    m.timestamp = buf;
    m.outputs = outputs;
    return m;
}

}  // namespace dgcim
