#include "qkdnoise/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "qkdnoise/cv_protocols.hpp"
#include "qkdnoise/di_qkd.hpp"
#include "qkdnoise/dv_mdi.hpp"
#include "qkdnoise/dv_source_mid.hpp"
#include "qkdnoise/scan.hpp"
#include "qkdnoise/validation.hpp"

#ifndef QKDNOISE_VERSION
#define QKDNOISE_VERSION "dev"
#endif

namespace qkdnoise::cli {

namespace {

using json = nlohmann::ordered_json;

struct Params {
    // model
    std::string protocol = "six-state-source-mid";
    double T = 0.5;
    double mu = 0.1;
    std::optional<double> T_b;
    std::optional<double> mu_b;
    double q = 1.0;
    double xi = 1.0;
    double eta = 1.0;
    bool pnr = false;
    bool onoff = false;
    std::optional<double> V;
    bool v_infinite = false;
    std::string mdi_engine = "auto";
    std::string di_engine = "channel";
    bool optimize_angles = false;
    // sweeps
    std::string curve = "mu-max";
    double t_lo = 0.01;
    double t_hi = 0.999;
    int points = 100;
    std::string grid = "log";
    double mu_lo = 0.0;
    double mu_hi = 0.05;
    int mu_points = 200;
    double tolerance = 1e-6;
    double mu_cap = 1e6;
    bool serial = false;
    std::string dv_protocol = "six-state-source-mid";
    std::string cv_protocol = "cv-source-mid";
    // validation
    std::int64_t samples = 1000000;
    int mc_configs = 10;
    // output and numerics
    std::string output;
    std::string format;
    std::uint64_t seed = 42;
    double tail_eps = 1e-12;
    int max_terms = 100000;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
};

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

json jnum(double v) {
    if (std::isfinite(v)) return v;
    return num(v);  // JSON has no inf/nan literals
}

std::string cell(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_null()) return "";
    if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
    return num(j.get<double>());
}

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
    int run(int argc, const char* const* argv);

private:
    CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& desc, Params& p,
                          const std::string& default_format);
    void add_model_options(CLI::App* sub, Params& p, bool channels);
    void add_sweep_options(CLI::App* sub, Params& p);
    void add_flag(CLI::App* sub, const std::string& name, bool& v, const std::string& desc);

    std::vector<std::string> merge_config(const std::vector<std::string>& args, CLI::App& app);

    void emit_table(const Table& t, const json& extra_meta = {});
    void emit_json(const json& result);
    json metadata() const;
    void write(const std::string& text, const std::string& ext);

    TruncationPolicy truncation() const;
    DetectorKind detector() const;
    TmsvSourceModel cv_source(bool default_infinite) const;
    scan::CurveSpec curve_spec(const std::string& protocol) const;

    int cmd_key_rate();
    int cmd_threshold_curve();
    int cmd_benchmark();
    int cmd_ratio_map();
    int cmd_di_curve();
    int cmd_validate();

    std::ostream& out_;
    std::ostream& err_;
    std::map<std::string, Params> params_;
    std::map<std::string, std::string> default_format_;
    std::set<std::string> flags_;
    CLI::App* active_ = nullptr;
    Params* p_ = nullptr;
    std::string command_;
    std::string config_path_;
};

void Runner::add_flag(CLI::App* sub, const std::string& name, bool& v, const std::string& desc) {
    sub->add_flag("--" + name, v, desc);
    flags_.insert(command_ + "/" + name);
}

CLI::App* Runner::add_command(CLI::App& app, const std::string& name, const std::string& desc, Params& p,
                              const std::string& default_format) {
    CLI::App* sub = app.add_subcommand(name, desc);
    default_format_[name] = default_format;
    command_ = name;
    sub->add_option("--output,-o", p.output, "output file (stdout when omitted)");
    sub->add_option("--format", p.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", p.seed, "run seed")->capture_default_str();
    sub->add_option("--tail-eps", p.tail_eps, "thermal tail mass dropped per truncated index")->capture_default_str();
    sub->add_option("--max-terms", p.max_terms, "upper bound on kept terms per index")->capture_default_str();
    return sub;
}

void Runner::add_model_options(CLI::App* sub, Params& p, bool channels) {
    sub->add_option("--protocol", p.protocol,
                    "six-state-source-mid, bb84-source-mid, six-state-mdi, bb84-mdi, cv-source-mid, cv-mdi, di")
        ->capture_default_str();
    if (channels) {
        sub->add_option("--T", p.T, "channel transmittance (both arms)")->capture_default_str();
        sub->add_option("--mu", p.mu, "mean thermal photon number (both arms)")->capture_default_str();
        sub->add_option("--T-b", p.T_b, "Bob's transmittance if different");
        sub->add_option("--mu-b", p.mu_b, "Bob's mean thermal photon number if different");
    }
    sub->add_option("--q", p.q, "pair generation probability")->capture_default_str();
    sub->add_option("--xi", p.xi, "photon collection efficiency")->capture_default_str();
    sub->add_option("--eta", p.eta, "detector efficiency")->capture_default_str();
    add_flag(sub, "pnr", p.pnr, "photon-number-resolving detectors (default)");
    add_flag(sub, "onoff", p.onoff, "on/off detectors");
    sub->add_option("--V", p.V, "TMSV quadrature variance");
    add_flag(sub, "v-infinite", p.v_infinite, "infinite TMSV variance (analytic limit)");
    sub->add_option("--mdi-engine", p.mdi_engine, "auto, appendix or station")
        ->check(CLI::IsMember({"auto", "appendix", "station"}))
        ->capture_default_str();
    sub->add_option("--di-engine", p.di_engine, "channel or appendix")
        ->check(CLI::IsMember({"channel", "appendix"}))
        ->capture_default_str();
}

void Runner::add_sweep_options(CLI::App* sub, Params& p) {
    sub->add_option("--t-min", p.t_lo, "lower end of the T grid")->capture_default_str();
    sub->add_option("--t-max", p.t_hi, "upper end of the T grid")->capture_default_str();
    sub->add_option("--points", p.points, "number of T grid points")->capture_default_str();
    sub->add_option("--grid", p.grid, "log or linear")->check(CLI::IsMember({"log", "linear"}))->capture_default_str();
    sub->add_option("--tolerance", p.tolerance, "relative solver tolerance")->capture_default_str();
    sub->add_option("--mu-cap", p.mu_cap, "largest mu tried by the threshold solver")->capture_default_str();
    add_flag(sub, "serial", p.serial, "evaluate grid points on one thread");
}

// Config file: flat key=value lines, '#' comments. Keys are long option
// names. File values are placed before the command-line tokens so that
// flags given explicitly win.
std::vector<std::string> Runner::merge_config(const std::vector<std::string>& args, CLI::App& app) {
    std::vector<std::string> rest;
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config needs a file name");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return rest;
    config_path_ = path;
    if (rest.empty()) throw ConfigError("a subcommand must precede the configuration");
    const std::string cmd = rest.front();
    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(cmd);
    } catch (const CLI::OptionNotFound&) {
        throw ConfigError("unknown subcommand '" + cmd + "'");
    }
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::vector<std::string> from_file;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        if (key == "config") throw ConfigError(path + ":" + std::to_string(lineno) + ": nested config files are not supported");
        if (sub->get_option_no_throw("--" + key) == nullptr)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " + cmd);
        if (flags_.count(cmd + "/" + key)) {
            if (value == "true" || value == "1")
                from_file.push_back("--" + key);
            else if (value != "false" && value != "0")
                throw ConfigError(path + ":" + std::to_string(lineno) + ": flag '" + key + "' takes true or false");
        } else {
            from_file.push_back("--" + key);
            from_file.push_back(value);
        }
    }
    std::vector<std::string> merged{cmd};
    merged.insert(merged.end(), from_file.begin(), from_file.end());
    merged.insert(merged.end(), rest.begin() + 1, rest.end());
    return merged;
}

json Runner::metadata() const {
    json cfg = json::object();
    for (const CLI::Option* opt : active_->get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
        const std::string name = opt->get_lnames()[0];
        if (name == "output") continue;  // location only, not part of the result
        std::string value;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            for (std::size_t i = 0; i < r.size(); ++i) value += (i ? " " : "") + r[i];
            if (flags_.count(command_ + "/" + name)) value = "true";
        } else {
            value = flags_.count(command_ + "/" + name) ? "false" : opt->get_default_str();
        }
        cfg[name] = value;
    }
    json m;
    m["program"] = "qkdnoise";
    m["version"] = QKDNOISE_VERSION;
    m["command"] = command_;
    m["seed"] = p_->seed;
    if (!config_path_.empty()) m["config_file"] = config_path_;
    m["config"] = cfg;
    return m;
}

void Runner::write(const std::string& text, const std::string& ext) {
    (void)ext;
    if (p_->output.empty()) {
        out_ << text;
        return;
    }
    std::filesystem::path path(p_->output);
    if (path.is_relative()) {
        if (const char* dir = std::getenv("QKDNOISE_OUTPUT_DIR"); dir && *dir) path = std::filesystem::path(dir) / path;
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write output file '" + path.string() + "'");
    f << text;
}

std::string resolve_format(const Params& p, const std::string& fallback) {
    if (!p.format.empty()) return p.format;
    if (p.output.size() >= 5 && p.output.substr(p.output.size() - 5) == ".json") return "json";
    if (p.output.size() >= 4 && p.output.substr(p.output.size() - 4) == ".csv") return "csv";
    return fallback;
}

void Runner::emit_table(const Table& t, const json& extra_meta) {
    json meta = metadata();
    for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) meta[it.key()] = it.value();
    if (resolve_format(*p_, default_format_[command_]) == "json") {
        json rows = json::array();
        for (const auto& r : t.rows) {
            json o = json::object();
            for (std::size_t i = 0; i < t.columns.size(); ++i) o[t.columns[i]] = r[i];
            rows.push_back(o);
        }
        json doc;
        doc["metadata"] = meta;
        doc["columns"] = t.columns;
        doc["rows"] = rows;
        write(doc.dump(2) + "\n", "json");
        return;
    }
    std::ostringstream s;
    s << "# program: qkdnoise " << cell(meta["version"]) << "\n";
    s << "# command: " << command_ << "\n";
    s << "# seed: " << p_->seed << "\n";
    if (!config_path_.empty()) s << "# config_file: " << config_path_ << "\n";
    for (auto it = meta["config"].begin(); it != meta["config"].end(); ++it)
        s << "# config." << it.key() << ": " << cell(it.value()) << "\n";
    for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) s << "# " << it.key() << ": " << cell(it.value()) << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) s << (i ? "," : "") << t.columns[i];
    s << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << cell(r[i]);
        s << "\n";
    }
    write(s.str(), "csv");
}

void Runner::emit_json(const json& result) {
    if (resolve_format(*p_, default_format_[command_]) == "csv") {
        Table t{{"field", "value"}, {}};
        for (auto it = result.begin(); it != result.end(); ++it) t.rows.push_back({it.key(), it.value()});
        emit_table(t);
        return;
    }
    json doc;
    doc["metadata"] = metadata();
    doc["result"] = result;
    write(doc.dump(2) + "\n", "json");
}

TruncationPolicy Runner::truncation() const {
    TruncationPolicy t;
    t.tail_epsilon = p_->tail_eps;
    t.max_terms = p_->max_terms;
    try {
        t.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return t;
}

DetectorKind Runner::detector() const {
    if (p_->pnr && p_->onoff) throw ConfigError("--pnr and --onoff are mutually exclusive");
    return p_->onoff ? DetectorKind::kOnOff : DetectorKind::kPnr;
}

TmsvSourceModel Runner::cv_source(bool default_infinite) const {
    if (p_->V && p_->v_infinite) throw ConfigError("--V and --v-infinite are mutually exclusive");
    if (p_->V) {
        try {
            return TmsvSourceModel::finite(*p_->V);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (p_->v_infinite || default_infinite) return TmsvSourceModel::infinite();
    throw ConfigError("give --V or --v-infinite for CV protocols");
}

mdi::MdiEngine mdi_engine(const std::string& s) {
    if (s == "appendix") return mdi::MdiEngine::kAppendixSums;
    if (s == "station") return mdi::MdiEngine::kStationModel;
    return mdi::MdiEngine::kAuto;
}

di::DiEngine di_engine(const std::string& s) {
    return s == "appendix" ? di::DiEngine::kAppendixSums : di::DiEngine::kChannelModel;
}

scan::CurveSpec Runner::curve_spec(const std::string& protocol) const {
    scan::CurveSpec s;
    s.protocol = scan::protocol_from_string(protocol);
    s.detector = detector();
    s.q = p_->q;
    s.xi = p_->xi;
    s.eta = p_->eta;
    s.cv_source = cv_source(true);
    s.mdi_engine = mdi_engine(p_->mdi_engine);
    s.di_engine = di_engine(p_->di_engine);
    s.truncation = truncation();
    s.tolerance = p_->tolerance;
    s.mu_cap = p_->mu_cap;
    s.exec = p_->serial ? Exec::kSerial : Exec::kParallel;
    if (p_->points < 2) throw ConfigError("--points must be at least 2");
    if (!(p_->t_lo > 0.0 && p_->t_hi > p_->t_lo && p_->t_hi <= 1.0))
        throw ConfigError("T grid needs 0 < t-min < t-max <= 1");
    s.grid = p_->grid == "log" ? scan::log_grid(p_->t_lo, p_->t_hi, p_->points)
                               : scan::linear_grid(p_->t_lo, p_->t_hi, p_->points);
    try {
        s.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

json opt_num(const std::optional<double>& v) { return v ? jnum(*v) : json(nullptr); }

int Runner::cmd_key_rate() {
    const scan::Protocol proto = scan::protocol_from_string(p_->protocol);
    const ChannelParams ch_a(p_->T, p_->mu);
    const ChannelParams ch_b(p_->T_b.value_or(p_->T), p_->mu_b.value_or(p_->mu));
    const bool symmetric = ch_a.transmittance == ch_b.transmittance && ch_a.mean_noise_photons == ch_b.mean_noise_photons;
    json r;
    switch (proto) {
        case scan::Protocol::kSixStateSourceMid:
        case scan::Protocol::kBb84SourceMid: {
            auto cfg = dv::DvSourceMidConfig::symmetric(p_->q, p_->xi, p_->T, p_->mu, p_->eta, detector());
            cfg.channel_b = ch_b;
            cfg.truncation = truncation();
            const auto res = dv::evaluate(cfg, proto == scan::Protocol::kBb84SourceMid ? dv::DvProtocol::kBb84
                                                                                        : dv::DvProtocol::kSixState);
            r["p_exp"] = jnum(res.p_exp);
            r["Q"] = opt_num(res.qber);
            r["K"] = jnum(res.key_rate);
            break;
        }
        case scan::Protocol::kSixStateMdi:
        case scan::Protocol::kBb84Mdi: {
            auto cfg = mdi::DvMdiConfig::symmetric(p_->q, p_->xi, p_->T, p_->mu, p_->eta, detector());
            cfg.channel_b = ch_b;
            cfg.truncation = truncation();
            const auto acc = symmetric ? mdi::mdi_acceptance_and_qber(cfg, mdi_engine(p_->mdi_engine))
                                       : mdi::mdi_acceptance_and_qber_general(cfg);
            const auto prot = proto == scan::Protocol::kBb84Mdi ? dv::DvProtocol::kBb84 : dv::DvProtocol::kSixState;
            r["p_exp"] = jnum(acc.p_exp);
            r["Q"] = opt_num(acc.qber);
            r["Q_other_bases"] = opt_num(mdi::qber_other_bases(cfg));
            r["K"] = jnum(dv::key_rate(prot, acc.p_exp, acc.qber));
            break;
        }
        case scan::Protocol::kCvSourceMid:
        case scan::Protocol::kCvMdi: {
            const auto res = cv::key_rate_cv_general(cv_source(false), ch_a, ch_b,
                                                     proto == scan::Protocol::kCvMdi ? cv::CvScheme::kMdi
                                                                                     : cv::CvScheme::kSourceMid);
            r["I_AB"] = jnum(res.mutual_info);
            r["chi"] = jnum(res.holevo);
            r["K"] = jnum(res.key_rate);
            break;
        }
        case scan::Protocol::kDi: {
            di::DiConfig cfg;
            cfg.channel_a = ch_a;
            cfg.channel_b = ch_b;
            cfg.truncation = truncation();
            if (p_->optimize_angles) cfg.angles = di::optimize_angles(cfg, di_engine(p_->di_engine));
            const auto res = di::di_chsh_and_key(cfg, di_engine(p_->di_engine));
            r["S"] = jnum(res.S);
            r["p_exp"] = jnum(res.p_exp);
            r["Q"] = opt_num(res.qber);
            r["K"] = jnum(res.key_rate);
            r["theta1_a"] = cfg.angles.theta1_a;
            r["theta2_a"] = cfg.angles.theta2_a;
            r["theta1_b"] = cfg.angles.theta1_b;
            r["theta2_b"] = cfg.angles.theta2_b;
            r["theta0_b"] = cfg.angles.theta0_b;
            break;
        }
    }
    emit_json(r);
    return 0;
}

Table curve_table(const std::vector<scan::CurvePoint>& pts) {
    Table t{{"x", "y", "status"}, {}};
    for (const auto& p : pts) t.rows.push_back({jnum(p.x), jnum(p.y), scan::to_string(p.status)});
    return t;
}

// Adds the zero-noise endpoint (T_min, 0) so the curve ends where the key does.
void add_endpoint(const scan::CurveSpec& spec, std::vector<scan::CurvePoint>& pts) {
    const scan::CurvePoint e = scan::t_min_at(spec, 0.0);
    if (e.status != scan::Status::kConverged || e.y < spec.grid.front() || e.y > spec.grid.back()) return;
    scan::CurvePoint p{e.y, 0.0, scan::Status::kConverged};
    auto it = std::lower_bound(pts.begin(), pts.end(), p, [](const auto& a, const auto& b) { return a.x < b.x; });
    pts.insert(it, p);
}

json reference_note(const scan::CurveSpec& s) {
    json m;
    if (s.cv_source.infinite_variance) m["cv_source"] = "infinite TMSV variance (analytic limit)";
    else m["cv_source"] = "V = " + num(s.cv_source.variance);
    return m;
}

int Runner::cmd_threshold_curve() {
    const scan::CurveSpec spec = curve_spec(p_->protocol);
    const std::string& c = p_->curve;
    std::vector<scan::CurvePoint> pts;
    json extra = reference_note(spec);
    if (c == "mu-max") {
        pts = scan::mu_max_curve(spec);
        add_endpoint(spec, pts);
    } else if (c == "key-rate") {
        pts = scan::key_rate_curve(spec, p_->mu);
        extra["mu"] = jnum(p_->mu);
    } else if (c == "min-q" || c == "min-xi") {
        if (!scan::is_dv(spec.protocol)) throw ConfigError("--curve " + c + " needs a DV protocol");
        extra["reference"] = is_mdi(spec.protocol) ? "cv-mdi" : "cv-source-mid";
        extra["cv_source"] = "infinite TMSV variance (analytic limit)";
        const auto b = scan::cv_benchmark(spec);
        pts = c == "min-q" ? scan::min_q_curve(b) : scan::min_xi_curve(b);
    } else if (c == "source-vs-mdi") {
        if (!scan::is_dv(spec.protocol) || scan::is_mdi(spec.protocol))
            throw ConfigError("--curve source-vs-mdi needs a DV source-in-the-middle protocol");
        pts = scan::source_vs_mdi_q_threshold(spec);
    } else {
        throw ConfigError("unknown curve '" + c + "'");
    }
    emit_table(curve_table(pts), extra);
    return 0;
}

int Runner::cmd_di_curve() {
    p_->protocol = "di";
    const scan::CurveSpec spec = curve_spec("di");
    auto pts = scan::mu_max_curve(spec);
    add_endpoint(spec, pts);
    emit_table(curve_table(pts));
    return 0;
}

int Runner::cmd_benchmark() {
    Table t{{"name", "value", "status"}, {}};
    auto row = [&](const std::string& name, const scan::CurvePoint& p) {
        t.rows.push_back({name, jnum(p.y), scan::to_string(p.status)});
    };
    scan::CurveSpec pnr;
    pnr.truncation = truncation();
    pnr.tolerance = p_->tolerance;
    pnr.exec = p_->serial ? Exec::kSerial : Exec::kParallel;
    scan::CurveSpec onoff = pnr;
    onoff.detector = DetectorKind::kOnOff;

    t.rows.push_back({"qber_threshold_six_state", qber_threshold_six_state(), "converged"});
    t.rows.push_back({"qber_threshold_bb84", qber_threshold_bb84(), "converged"});
    for (auto [name, proto] : {std::pair{"t_min_cv_source_mid", scan::Protocol::kCvSourceMid},
                               std::pair{"t_min_cv_mdi", scan::Protocol::kCvMdi},
                               std::pair{"t_min_di", scan::Protocol::kDi}}) {
        scan::CurveSpec s = pnr;
        s.protocol = proto;
        row(name, scan::t_min_at(s, 0.0));
    }
    const auto b = scan::cv_benchmark(pnr);
    row("min_xi_pnr_T0.801", scan::min_xi_at(b, 0.801));
    scan::BenchmarkSpec bq = b;
    bq.dv.grid = scan::default_t_grid();
    const auto qs = scan::min_q_curve(bq);
    scan::CurvePoint qmax{0.0, 0.0, scan::Status::kConverged};
    for (const auto& p : qs)
        if (p.status == scan::Status::kConverged && p.y > qmax.y) qmax = p;
    row("min_q_pnr_max_over_T", qmax);
    row("min_q_pnr_argmax_T", {0.0, qmax.x, qmax.status});
    row("onoff_advantage_cutoff_T", scan::advantage_cutoff(scan::cv_benchmark(onoff), 0.64, 0.999));
    row("source_vs_mdi_q_pnr_T0.999", scan::source_vs_mdi_q_at(pnr, 0.999));
    row("source_vs_mdi_q_pnr_T0.01", scan::source_vs_mdi_q_at(pnr, 0.01));
    scan::CurveSpec so = onoff;
    so.grid = scan::default_t_grid();
    const auto sq = scan::source_vs_mdi_q_threshold(so);
    scan::CurvePoint smax{0.0, 0.0, scan::Status::kConverged};
    for (const auto& p : sq)
        if (p.status == scan::Status::kConverged && p.y > smax.y) smax = p;
    row("source_vs_mdi_q_onoff_max_over_T", smax);
    emit_table(t, {{"cv_source", "infinite TMSV variance (analytic limit)"}});
    return 0;
}

int Runner::cmd_ratio_map() {
    scan::MapSpec m;
    m.cv = curve_spec(p_->cv_protocol);
    m.dv = curve_spec(p_->dv_protocol);
    if (scan::is_dv(m.cv.protocol) || !scan::is_dv(m.dv.protocol))
        throw ConfigError("ratio-map compares a CV protocol (--cv-protocol) with a DV one (--dv-protocol)");
    if (p_->mu_points < 2 || !(p_->mu_hi > p_->mu_lo) || p_->mu_lo < 0.0)
        throw ConfigError("mu grid needs 0 <= mu-min < mu-max and at least 2 points");
    m.t_grid = p_->grid == "log" ? scan::log_grid(p_->t_lo, p_->t_hi, p_->points)
                                 : scan::linear_grid(p_->t_lo, p_->t_hi, p_->points);
    m.mu_grid = scan::linear_grid(p_->mu_lo, p_->mu_hi, p_->mu_points);
    const auto cells = scan::key_ratio_map(m, p_->serial ? Exec::kSerial : Exec::kParallel);
    Table t{{"T", "mu", "ratio", "region"}, {}};
    for (const auto& c : cells) t.rows.push_back({jnum(c.T), jnum(c.mu), jnum(c.ratio), scan::to_string(c.region)});
    emit_table(t, reference_note(m.cv));
    return 0;
}

int Runner::cmd_validate() {
    validation::ValidationOptions o;
    o.seed = p_->seed;
    o.samples = p_->samples;
    o.mc_configs = p_->mc_configs;
    if (o.samples < 100) throw ConfigError("--samples must be at least 100");
    if (o.mc_configs < 1) throw ConfigError("--mc-configs must be positive");
    const auto results = validation::run_all(o);
    Table t{{"check", "status", "value", "tolerance", "detail"}, {}};
    int failed = 0;
    for (const auto& r : results) {
        failed += r.passed ? 0 : 1;
        t.rows.push_back({r.name, r.passed ? "pass" : "fail", jnum(r.value), jnum(r.tolerance), r.detail});
    }
    emit_table(t, {{"checks", static_cast<int>(results.size())}, {"failures", failed}});
    if (failed) err_ << "validate: " << failed << " check(s) failed\n";
    return failed ? 1 : 0;
}

int Runner::run(int argc, const char* const* argv) {
    CLI::App app{"qkdnoise: key rates and noise thresholds for DV, CV and DI QKD layouts"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("qkdnoise ") + QKDNOISE_VERSION);
    app.footer("Options may also come from --config FILE (key=value per line); command-line flags take precedence.");

    for (const char* name : {"key-rate", "threshold-curve", "benchmark", "ratio-map", "di-curve", "validate"})
        params_[name] = Params{};
    params_["ratio-map"].t_hi = 1.0;
    params_["ratio-map"].points = 200;
    params_["ratio-map"].grid = "linear";
    params_["di-curve"].t_lo = 0.8;
    params_["di-curve"].points = 50;
    params_["di-curve"].grid = "linear";

    {
        Params& p = params_["key-rate"];
        CLI::App* s = add_command(app, "key-rate", "evaluate one configuration", p, "json");
        add_model_options(s, p, true);
        add_flag(s, "optimize-angles", p.optimize_angles, "optimize DI measurement angles first");
    }
    {
        Params& p = params_["threshold-curve"];
        CLI::App* s = add_command(app, "threshold-curve", "threshold curves along T", p, "csv");
        add_model_options(s, p, false);
        add_sweep_options(s, p);
        s->add_option("--curve", p.curve, "mu-max, key-rate, min-q, min-xi or source-vs-mdi")
            ->check(CLI::IsMember({"mu-max", "key-rate", "min-q", "min-xi", "source-vs-mdi"}))
            ->capture_default_str();
        s->add_option("--mu", p.mu, "noise level for --curve key-rate")->capture_default_str();
    }
    {
        Params& p = params_["benchmark"];
        CLI::App* s = add_command(app, "benchmark", "headline thresholds and cross-scheme benchmarks", p, "csv");
        s->add_option("--tolerance", p.tolerance, "relative solver tolerance")->capture_default_str();
        add_flag(s, "serial", p.serial, "evaluate grid points on one thread");
    }
    {
        Params& p = params_["ratio-map"];
        CLI::App* s = add_command(app, "ratio-map", "K_CV / K_DV over (T, mu)", p, "csv");
        add_model_options(s, p, false);
        add_sweep_options(s, p);
        s->add_option("--dv-protocol", p.dv_protocol, "DV protocol")->capture_default_str();
        s->add_option("--cv-protocol", p.cv_protocol, "CV protocol")->capture_default_str();
        s->add_option("--mu-min", p.mu_lo, "lower end of the mu grid")->capture_default_str();
        s->add_option("--mu-max", p.mu_hi, "upper end of the mu grid")->capture_default_str();
        s->add_option("--mu-points", p.mu_points, "number of mu grid points")->capture_default_str();
    }
    {
        Params& p = params_["di-curve"];
        CLI::App* s = add_command(app, "di-curve", "maximal tolerable noise of DI QKD along T", p, "csv");
        add_sweep_options(s, p);
        s->add_option("--di-engine", p.di_engine, "channel or appendix")
            ->check(CLI::IsMember({"channel", "appendix"}))
            ->capture_default_str();
    }
    {
        Params& p = params_["validate"];
        CLI::App* s = add_command(app, "validate", "oracle-vs-analytic checks", p, "csv");
        s->add_option("--samples", p.samples, "Monte Carlo samples per configuration")->capture_default_str();
        s->add_option("--mc-configs", p.mc_configs, "number of random Monte Carlo configurations")->capture_default_str();
    }

    try {
        std::vector<std::string> args;
        for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
        args = merge_config(args, app);
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
        for (CLI::App* s : app.get_subcommands()) {
            active_ = s;
            command_ = s->get_name();
        }
        p_ = &params_[command_];
        if (command_ == "key-rate") return cmd_key_rate();
        if (command_ == "threshold-curve") return cmd_threshold_curve();
        if (command_ == "benchmark") return cmd_benchmark();
        if (command_ == "ratio-map") return cmd_ratio_map();
        if (command_ == "di-curve") return cmd_di_curve();
        if (command_ == "validate") return cmd_validate();
        throw ConfigError("no subcommand");
    } catch (const CLI::CallForHelp&) {
        out_ << (active_ ? active_->help() : app.help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out_ << "qkdnoise " << QKDNOISE_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err_ << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err_ << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        // parameters outside the model's domain come from the user
        err_ << "configuration error in " << e.module() << ": " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err_ << "numerical failure in " << e.module() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err_ << "failure: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Runner r(out, err);
    return r.run(argc, argv);
}

}  // namespace qkdnoise::cli
