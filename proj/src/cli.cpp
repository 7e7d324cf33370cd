#include "ivdac/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "ivdac/analysis.hpp"
#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"
#include "ivdac/io.hpp"
#include "ivdac/iondyn.hpp"
#include "ivdac/rcfilter.hpp"
#include "ivdac/serialbus.hpp"
#include "ivdac/trapfield.hpp"
#include "ivdac/wavecomp.hpp"

namespace ivdac::cli {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string num(double v, int precision = 10) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(precision) << v;
    return os.str();
}

// Shared options and output plumbing for one subcommand invocation.
struct Context {
    CLI::App* app = nullptr;
    std::string out_dir;
    std::uint64_t seed = 1;
    std::vector<std::string> inputs;  // files whose contents feed the digest
    std::ostream* out = nullptr;

    std::string digest() const {
        std::map<std::string, std::string> config;
        for (const auto* opt : app->get_options()) {
            const auto name = opt->get_name();
            if (name == "--help" || name == "--out") continue;
            std::string value;
            if (opt->count() > 0) {
                for (const auto& r : opt->results()) value += r + ";";
            } else {
                value = opt->get_default_str();
            }
            config[name] = value;
        }
        std::uint64_t h = fnv1a(app->get_name());
        for (const auto& [k, v] : config) h = fnv1a(k + "=" + v + "\n", h);
        for (const auto& path : inputs) h = fnv1a(io::read_text(path), h);
        return hex(h);
    }

    std::string header() const {
        return "# ivdac " IVDAC_VERSION " config=" + digest() + " seed=" + std::to_string(seed) + "\n";
    }

    fs::path path(const std::string& name) const {
        fs::path dir = out_dir;
        if (dir.empty()) {
            const char* env = std::getenv(kOutDirEnv);
            dir = env && *env ? fs::path(env) : fs::path(".");
        }
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw InputError("cannot create output directory " + dir.string());
        return dir / name;
    }

    void write(const std::string& name, const std::string& body) const {
        const auto p = path(name);
        std::ofstream f(p, std::ios::binary);
        if (!f) throw InputError("cannot write " + p.string());
        f << header() << body;
        *out << "wrote " << p.string() << '\n';
    }

    void write_json(const std::string& name, io::Json body) const {
        io::Json j;
        j["provenance"] = {{"tool", "ivdac"}, {"version", IVDAC_VERSION}, {"config", digest()}, {"seed", seed}};
        for (auto& [k, v] : body.items()) j[k] = v;
        const auto p = path(name);
        std::ofstream f(p, std::ios::binary);
        if (!f) throw InputError("cannot write " + p.string());
        f << j.dump(1) << '\n';
        *out << "wrote " << p.string() << '\n';
    }

    // Report to stdout and to a file.
    void report(const std::string& name, const std::string& body) const {
        *out << body;
        write(name, body);
    }
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        std::istringstream is(item);
        is.imbue(std::locale::classic());
        if (!(is >> v)) throw InputError("cannot parse number list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("empty number list");
    return out;
}

ElectrodeGeometry load_geometry(Context& ctx, const std::string& path) {
    if (path.empty()) return bundled_geometry();
    ctx.inputs.push_back(path);
    return io::geometry_from_json(io::read_json(path));
}

std::string well_report(const WellProperties& w) {
    std::ostringstream os;
    os << "position_m: " << num(w.position.x()) << ' ' << num(w.position.y()) << ' ' << num(w.position.z()) << '\n'
       << "axial_frequency_hz: " << num(w.axial_frequency / constants::two_pi) << '\n'
       << "radial_frequency_1_hz: " << num(w.radial_frequency_1 / constants::two_pi) << '\n'
       << "radial_frequency_2_hz: " << num(w.radial_frequency_2 / constants::two_pi) << '\n'
       << "depth_ev: " << num(w.depth_ev) << '\n'
       << "barrier_distance_m: " << num(w.barrier_distance) << '\n';
    return os.str();
}

// Solved well shared by several subcommands.
struct WellOptions {
    std::string geometry;
    double position = 0.0;
    double fz = constants::nominal_axial_frequency_hz;
    double bound = 10.0;
    bool cubic = false;

    void add(CLI::App* sub) {
        sub->add_option("--geometry", geometry, "Geometry JSON (default: bundled trap)");
        sub->add_option("--position", position, "Axial well position, m")->capture_default_str();
        sub->add_option("--fz", fz, "Axial frequency, Hz")->capture_default_str();
        sub->add_option("--bound", bound, "Electrode voltage bound, V")->capture_default_str();
        sub->add_flag("--cubic", cubic, "Also null the axial cubic term");
    }

    VoltageSolution solve(const ElectrodeGeometry& g) const {
        WellTarget t;
        t.axial_position = position;
        t.axial_frequency = constants::two_pi * fz;
        t.null_axial_cubic = cubic;
        return solve_voltages(g, g.ion(), t, bound);
    }
};

using Handler = std::function<void(Context&)>;

struct Registry {
    CLI::App& app;
    std::vector<std::pair<CLI::App*, Handler>> handlers;
    std::vector<std::unique_ptr<Context>> contexts;

    CLI::App* add(const std::string& name, const std::string& description, std::ostream& out) {
        auto* sub = app.add_subcommand(name, description);
        auto ctx = std::make_unique<Context>();
        ctx->app = sub;
        ctx->out = &out;
        sub->add_option("--out", ctx->out_dir, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
        sub->add_option("--seed", ctx->seed, "Random seed recorded in every output")->capture_default_str();
        contexts.push_back(std::move(ctx));
        return sub;
    }

    Context& last() { return *contexts.back(); }
};

void add_compile(Registry& r, std::ostream& out) {
    auto* sub = r.add("compile", "Compile a voltage timeline into DAC update packets", out);
    struct Opts {
        std::string timeline;
        std::string timing = "paper-nominal";
        std::size_t budget = 40;
        double rate = 0.0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--timeline", o->timeline, "Timeline JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--timing", o->timing, "Timing model name")->capture_default_str();
    sub->add_option("--pair-budget", o->budget, "Channel pairs per packet before flagging")->capture_default_str();
    sub->add_option("--rate", o->rate, "Requested update rate, Hz (0: maximum)")->capture_default_str();
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        ctx.inputs.push_back(o->timeline);
        const auto timing = TimingModel::by_name(o->timing);
        const auto tl = io::timeline_from_json(io::read_json(o->timeline));
        const auto wf = compile(tl, CompileOptions{o->budget});
        const auto rate = max_update_rate(wf, timing);
        const double requested = o->rate > 0.0 ? o->rate : rate.max_rate_hz;
        const auto schedule = ldac_schedule(wf, timing, requested);
        ctx.write_json("waveform.json", io::waveform_to_json(wf));

        std::size_t max_pairs = 0;
        for (std::size_t k = 1; k < wf.packets.size(); ++k) max_pairs = std::max(max_pairs, wf.packets[k].pair_count());
        std::ostringstream os;
        os << "packets: " << wf.packets.size() << '\n'
           << "initial_load_pairs: " << (wf.packets.empty() ? 0 : wf.packets[0].pair_count()) << '\n'
           << "max_delta_pairs: " << max_pairs << '\n'
           << "clamped_voltages: " << wf.clamped_voltages << '\n'
           << "over_budget_packets: " << wf.over_budget_packets << '\n'
           << "max_update_rate_hz: " << num(rate.max_rate_hz) << '\n'
           << "max_update_rate_khz: " << std::fixed << std::setprecision(2) << rate.max_rate_hz / 1e3 << '\n'
           << std::defaultfloat << "bottleneck_packet: " << rate.bottleneck_packet << '\n'
           << "bottleneck_upload_us: " << num(rate.bottleneck_upload_s * 1e6) << '\n'
           << "requested_rate_hz: " << num(requested) << '\n'
           << "first_ldac_us: " << num(schedule.empty() ? 0.0 : schedule.front() * 1e6) << '\n'
           << "source_hash: " << wf.source_hash << '\n';
        ctx.report("timing_report.txt", os.str());
    });
}

void add_session(Registry& r, std::ostream& out) {
    auto* sub = r.add("session", "Emulate the serial bus for a compiled waveform and replay the trace", out);
    struct Opts {
        std::string waveform;
        std::string timing = "paper-nominal";
        double rate = 0.0;
        double flip = 0.0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--waveform", o->waveform, "Compiled waveform JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--timing", o->timing, "Timing model name")->capture_default_str();
    sub->add_option("--rate", o->rate, "LDAC rate, Hz (0: maximum)")->capture_default_str();
    sub->add_option("--flip-prob", o->flip, "SDI bit-flip probability")->capture_default_str();
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        ctx.inputs.push_back(o->waveform);
        const auto timing = TimingModel::by_name(o->timing);
        const auto wf = io::waveform_from_json(io::read_json(o->waveform));
        const double rate = o->rate > 0.0 ? o->rate : max_update_rate(wf, timing).max_rate_hz;
        const auto schedule = ldac_schedule(wf, timing, rate);
        auto trace = simulate_session(wf, timing, schedule);
        if (o->flip > 0.0) trace = inject_noise(trace, o->flip, ctx.seed);
        const auto rx = replay_trace(trace);

        DacRegisterFile direct;
        for (const auto& p : wf.packets) {
            for (const auto& w : p.writes) direct.stage_write(w.channel, w.code);
            direct.latch();
        }
        std::ostringstream csv;
        trace.write_csv(csv);
        ctx.write("trace.csv", csv.str());

        std::ostringstream os;
        os << "packets: " << wf.packets.size() << '\n'
           << "ldac_rate_hz: " << num(rate) << '\n'
           << "events: " << trace.events.size() << '\n'
           << "busy_low_ns: " << trace.busy_low_ns() << '\n'
           << "session_end_ns: " << (trace.events.empty() ? 0 : trace.events.back().time_ns) << '\n'
           << "rejected_frames: " << rx.rejected_frames << '\n'
           << "latched_match: " << (rx.registers.latched_codes() == direct.latched_codes() ? "yes" : "no") << '\n';
        ctx.report("session_report.txt", os.str());
    });
}

void add_ber(Registry& r, std::ostream& out) {
    auto* sub = r.add("ber-test", "Bit-error-rate test over emulated bus traces", out);
    auto cfg = std::make_shared<BerTestConfig>();
    sub->add_option("--bits", cfg->total_bits, "Total bits to send")->capture_default_str();
    sub->add_option("--traces", cfg->traces, "Number of traces")->capture_default_str();
    sub->add_option("--flip-prob", cfg->flip_probability, "Injected bit-flip probability")->capture_default_str();
    sub->add_option("--confidence", cfg->confidence, "Confidence level of the bound")->capture_default_str();
    r.handlers.emplace_back(sub, [cfg](Context& ctx) {
        auto c = *cfg;
        c.seed = ctx.seed;
        ctx.report("ber_report.txt", run_ber_test(c).report());
    });
}

void add_filter(Registry& r, std::ostream& out) {
    auto* sub = r.add("filter-response", "Bode and step response of the electrode filter", out);
    struct Opts {
        std::string filter = "nominal";
        double fmin = 10.0;
        double fmax = 1e7;
        int points = 200;
        double duration = 0.0;
        int step_points = 500;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--filter", o->filter, "nominal | unbuffered | buffered | paper-fit")->capture_default_str();
    sub->add_option("--fmin", o->fmin, "Lowest frequency, Hz")->capture_default_str();
    sub->add_option("--fmax", o->fmax, "Highest frequency, Hz")->capture_default_str();
    sub->add_option("--points", o->points, "Bode points")->capture_default_str()->check(CLI::Range(2, 1000000));
    sub->add_option("--duration", o->duration, "Step response span, s (0: 20 tau)")->capture_default_str();
    sub->add_option("--step-points", o->step_points, "Step response points")
        ->capture_default_str()
        ->check(CLI::Range(2, 1000000));
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        const auto p = FilterParams::by_name(o->filter);
        if (!(o->fmin > 0.0) || !(o->fmax > o->fmin)) throw InputError("need 0 < fmin < fmax");
        std::ostringstream bode;
        bode << "f_hz,gain_db,phase_deg\n";
        for (int i = 0; i < o->points; ++i) {
            const double f = o->fmin * std::pow(o->fmax / o->fmin, static_cast<double>(i) / (o->points - 1));
            const auto h = transfer(f, p);
            bode << num(f) << ',' << num(20.0 * std::log10(std::abs(h))) << ','
                 << num(std::arg(h) * 180.0 / constants::pi) << '\n';
        }
        ctx.write("bode.csv", bode.str());
        const double span = o->duration > 0.0 ? o->duration : 20.0 * p.tau();
        std::ostringstream step;
        step << "t_s,response\n";
        for (int i = 0; i < o->step_points; ++i) {
            const double t = span * i / (o->step_points - 1);
            step << num(t) << ',' << num(step_response(p, t)) << '\n';
        }
        ctx.write("step.csv", step.str());
        std::ostringstream os;
        os << "filter: " << o->filter << '\n'
           << "r_ohm: " << num(p.r_per_stage) << '\n'
           << "c_f: " << num(p.c_per_stage) << '\n'
           << "buffered: " << (p.buffered ? "yes" : "no") << '\n'
           << "tau_s: " << num(p.tau()) << '\n'
           << "f3db_hz: " << num(f3db(p)) << '\n';
        ctx.report("filter_report.txt", os.str());
    });
}

void add_solve_well(Registry& r, std::ostream& out) {
    auto* sub = r.add("solve-well", "Solve electrode voltages for a harmonic well", out);
    auto w = std::make_shared<WellOptions>();
    w->add(sub);
    r.handlers.emplace_back(sub, [w](Context& ctx) {
        const auto g = load_geometry(ctx, w->geometry);
        const auto sol = w->solve(g);
        std::ostringstream csv;
        csv << "channel,volts\n";
        for (std::size_t i = 0; i < g.channel_count(); ++i) {
            csv << g.channels()[i].label() << ',' << num(sol.volts[i]) << '\n';
        }
        ctx.write("voltages.csv", csv.str());
        std::ostringstream os;
        os << well_report(sol.well) << "mathieu_q: " << num(mathieu_q_principal(g, g.ion(), sol.target_point)) << '\n'
           << "channels_at_bound: " << sol.at_bounds.size() << '\n';
        ctx.report("well_report.txt", os.str());
    });
}

void add_transport(Registry& r, std::ostream& out) {
    auto* sub = r.add("transport", "Simulate ion transport through filtered, stepped potentials", out);
    struct Opts {
        std::string geometry;
        double start = -500e-6;
        double end = 500e-6;
        double speed = 1.0;
        double rate = 38e3;
        double fz = constants::nominal_axial_frequency_hz;
        double hold = 100e-6;
        std::string filter = "paper-fit";
        std::string timing = "paper-nominal";
        std::string mode = "secular";
        std::string profile = "linear";
        double dt = 0.0;
        bool no_check = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--geometry", o->geometry, "Geometry JSON (default: bundled trap)");
    sub->add_option("--start", o->start, "Start position, m")->capture_default_str();
    sub->add_option("--end", o->end, "End position, m")->capture_default_str();
    sub->add_option("--speed", o->speed, "Transport speed, m/s")->capture_default_str();
    sub->add_option("--rate", o->rate, "Voltage update rate, Hz")->capture_default_str();
    sub->add_option("--fz", o->fz, "Axial frequency, Hz")->capture_default_str();
    sub->add_option("--hold", o->hold, "Hold after the last update, s")->capture_default_str();
    sub->add_option("--filter", o->filter, "Filter configuration")->capture_default_str();
    sub->add_option("--timing", o->timing, "Timing model name")->capture_default_str();
    sub->add_option("--mode", o->mode, "secular | full_rf")
        ->capture_default_str()
        ->check(CLI::IsMember({"secular", "full_rf"}));
    sub->add_option("--profile", o->profile, "linear | s-curve")
        ->capture_default_str()
        ->check(CLI::IsMember({"linear", "s-curve"}));
    sub->add_option("--dt", o->dt, "Integration step, s (0: automatic)")->capture_default_str();
    sub->add_flag("--no-convergence-check", o->no_check, "Skip the step-halving rerun");
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        const auto g = load_geometry(ctx, o->geometry);
        TransportRequest rq;
        rq.start = o->start;
        rq.end = o->end;
        rq.speed = o->speed;
        rq.update_rate_hz = o->rate;
        rq.axial_frequency = constants::two_pi * o->fz;
        rq.hold_s = o->hold;
        rq.timing = TimingModel::by_name(o->timing);
        rq.profile = o->profile == "linear" ? TransportProfile::Linear : TransportProfile::SCurve;
        const auto filter = FilterParams::by_name(o->filter);
        const auto plan = plan_transport(g, g.ion(), rq);
        IonState initial;
        initial.position = rf_null(g, rq.start);
        IntegrateOptions opt;
        opt.dt = o->dt;
        opt.convergence_check = !o->no_check;
        const auto res = integrate(plan, filter, g.ion(), initial,
                                   o->mode == "secular" ? DynamicsMode::Secular : DynamicsMode::FullRf, opt);
        std::ostringstream csv;
        res.write_csv(csv);
        ctx.write("trajectory.csv", csv.str());
        std::ostringstream os;
        os << "updates: " << plan.waypoints.size() << '\n'
           << "bus_max_rate_hz: " << num(plan.rate.max_rate_hz) << '\n'
           << "mode: " << o->mode << '\n'
           << res.report();
        ctx.report("transport_report.txt", os.str());
    });
}

void add_modes(Registry& r, std::ostream& out) {
    auto* sub = r.add("modes", "Axial normal modes of an ion crystal", out);
    struct Opts {
        int n = 2;
        double fz = constants::nominal_axial_frequency_hz;
        double mass_amu = constants::calcium40_mass_amu;
        double charge_e = 1.0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--n", o->n, "Number of ions")->capture_default_str();
    sub->add_option("--fz", o->fz, "Single-ion axial frequency, Hz")->capture_default_str();
    sub->add_option("--mass-amu", o->mass_amu, "Ion mass, u")->capture_default_str();
    sub->add_option("--charge-e", o->charge_e, "Ion charge, e")->capture_default_str();
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        const auto ion = IonSpecies::from_amu(o->mass_amu, o->charge_e);
        const double w = constants::two_pi * o->fz;
        const auto modes = normal_modes(o->n, ion, w);
        const auto pos = equilibrium_positions(o->n, ion, w);
        std::ostringstream os;
        os << "ions: " << o->n << '\n';
        for (std::size_t k = 0; k < modes.size(); ++k) {
            os << "mode_" << k << "_hz: " << num(modes[k] / constants::two_pi) << " (ratio " << num(modes[k] / w)
               << ")\n";
        }
        for (std::size_t k = 0; k < pos.size(); ++k) os << "position_" << k << "_m: " << num(pos[k]) << '\n';
        if (o->n >= 2) os << "min_spacing_m: " << num(equilibrium_spacing(o->n, ion, w)) << '\n';
        ctx.report("modes.txt", os.str());
    });
}

void add_heating(Registry& r, std::ostream& out) {
    auto* sub = r.add("heating-fit", "Heating rate from sideband ratios versus delay", out);
    auto input = std::make_shared<std::string>();
    sub->add_option("--input", *input, "CSV: delay_ms, i_red, i_blue[, sigma_red, sigma_blue]")
        ->required()
        ->check(CLI::ExistingFile);
    r.handlers.emplace_back(sub, [input](Context& ctx) {
        ctx.inputs.push_back(*input);
        std::ifstream f(*input);
        const auto points = io::read_sidebands(f);
        const auto fit = heating_rate_fit(points);
        std::ostringstream os;
        for (const auto& p : points) {
            const auto occ = nbar_from_sidebands(p.i_red, p.i_blue, p.sigma_red, p.sigma_blue);
            os << "nbar_at_" << num(p.delay_ms) << "_ms: " << num(occ.nbar) << " +- " << num(occ.sigma) << '\n';
        }
        os << format_fit(fit, "quanta/ms");
        ctx.report("heating_fit.txt", os.str());
    });
}

void add_drift(Registry& r, std::ostream& out) {
    auto* sub = r.add("drift-fit", "Linear drift of a mode frequency", out);
    auto input = std::make_shared<std::string>();
    sub->add_option("--input", *input, "CSV: time_hr, freq_hz[, reload_flag]")->required()->check(CLI::ExistingFile);
    r.handlers.emplace_back(sub, [input](Context& ctx) {
        ctx.inputs.push_back(*input);
        std::ifstream f(*input);
        const auto samples = io::read_drift(f);
        std::size_t reloads = 0;
        for (const auto& s : samples) reloads += s.reload ? 1 : 0;
        std::ostringstream os;
        os << "samples: " << samples.size() << "\nreloads: " << reloads << '\n'
           << format_fit(drift_fit(samples), "Hz/hr");
        ctx.report("drift_fit.txt", os.str());
    });
}

void add_fieldmap(Registry& r, std::ostream& out) {
    auto* sub = r.add("fieldmap", "Stray axial field map by well scaling, plus a potential grid", out);
    struct Opts {
        WellOptions well;
        std::string positions = "-390e-6,0,390e-6";
        std::string scales = "1,1.5,2,3,4";
        double stray = 0.0;
        int grid = 41;
        double half_span = 200e-6;
    };
    auto o = std::make_shared<Opts>();
    o->well.add(sub);
    sub->add_option("--positions", o->positions, "Comma-separated axial positions, m")->capture_default_str();
    sub->add_option("--scales", o->scales, "Comma-separated well scale factors")->capture_default_str();
    sub->add_option("--stray-field", o->stray, "Hidden uniform axial field, V/m")->capture_default_str();
    sub->add_option("--grid", o->grid, "Grid points per axis (x-z plane at y = 0; 0 disables)")
        ->capture_default_str()
        ->check(CLI::Range(0, 2001));
    sub->add_option("--half-span", o->half_span, "Grid half width along x, m")->capture_default_str();
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        const auto g = load_geometry(ctx, o->well.geometry);
        const auto scales = parse_list(o->scales);
        std::ostringstream csv;
        csv << "position_m,estimated_field_v_per_m,shift_per_unit_scale_m,axial_frequency_hz\n";
        for (double x : parse_list(o->positions)) {
            auto w = o->well;
            w.position = x;
            const auto sol = w.solve(g);
            const auto m = stray_field_measurement(g, g.ion(), sol.volts, o->stray, scales, sol.well.position);
            csv << num(x) << ',' << num(m.estimated_field) << ',' << num(m.shift_per_unit_scale) << ','
                << num(m.axial_frequency / constants::two_pi) << '\n';
        }
        ctx.write("stray_field_map.csv", csv.str());

        if (o->grid > 0) {
            const auto sol = o->well.solve(g);
            const auto& c = sol.target_point;
            std::ostringstream grid;
            grid << "x_m,y_m,z_m,phi_dc_v,pseudo_ev,ex_v_per_m,ey_v_per_m,ez_v_per_m\n";
            const int n = std::max(o->grid, 2);
            for (int i = 0; i < n; ++i) {
                for (int k = 0; k < n; ++k) {
                    const Vec3 p(c.x() - o->half_span + 2.0 * o->half_span * i / (n - 1), 0.0,
                                 c.z() * (0.5 + static_cast<double>(k) / (n - 1)));
                    const Vec3 e = -g.dc_gradient(sol.volts, p);
                    grid << num(p.x()) << ',' << num(p.y()) << ',' << num(p.z()) << ','
                         << num(g.dc_value(sol.volts, p)) << ','
                         << num(pseudopotential(g, g.ion(), p) / constants::elementary_charge) << ',' << num(e.x())
                         << ',' << num(e.y()) << ',' << num(e.z()) << '\n';
                }
            }
            ctx.write("potential_grid.csv", grid.str());
        }
    });
}

void add_spectrum(Registry& r, std::ostream& out) {
    auto* sub = r.add("spectrum", "Motional sideband positions for a solved well", out);
    struct Opts {
        WellOptions well;
        double carrier = 0.0;
        int order = 2;
    };
    auto o = std::make_shared<Opts>();
    o->well.add(sub);
    sub->add_option("--carrier", o->carrier, "Carrier frequency, Hz")->capture_default_str();
    sub->add_option("--order", o->order, "Highest sideband order (1 or 2)")
        ->capture_default_str()
        ->check(CLI::Range(1, 2));
    r.handlers.emplace_back(sub, [o](Context& ctx) {
        const auto g = load_geometry(ctx, o->well.geometry);
        const auto sol = o->well.solve(g);
        std::ostringstream csv;
        csv << "label,offset_hz,frequency_hz\n";
        for (const auto& l : sideband_spectrum(sol.well, o->carrier, o->order)) {
            csv << l.label << ',' << num(l.offset_hz) << ',' << num(l.frequency_hz) << '\n';
        }
        ctx.write("spectrum.csv", csv.str());
        ctx.report("spectrum_report.txt", well_report(sol.well));
    });
}

void build(Registry& r, std::ostream& out) {
    add_compile(r, out);
    add_session(r, out);
    add_ber(r, out);
    add_filter(r, out);
    add_solve_well(r, out);
    add_transport(r, out);
    add_modes(r, out);
    add_heating(r, out);
    add_drift(r, out);
    add_fieldmap(r, out);
    add_spectrum(r, out);
}

}  // namespace

std::vector<std::string> subcommands() {
    CLI::App app;
    std::ostringstream sink;
    Registry r{app, {}, {}};
    build(r, sink);
    std::vector<std::string> names;
    for (const auto* s : app.get_subcommands({})) names.push_back(s->get_name());
    return names;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app("In-vacuum DAC control stack simulator", "ivdac");
    app.set_version_flag("--version", IVDAC_VERSION);
    app.require_subcommand(1);
    Registry r{app, {}, {}};
    build(r, out);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    for (std::size_t i = 0; i < r.handlers.size(); ++i) {
        auto& [sub, handler] = r.handlers[i];
        if (!sub->parsed()) continue;
        try {
            handler(*r.contexts[i]);
            return 0;
        } catch (const std::invalid_argument& e) {
            err << "error: " << e.what() << '\n';
            return 1;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return 2;
        }
    }
    return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"ivdac"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ivdac::cli
