#include "wappo/experiment.hpp"

#include "wappo/checkpoint.hpp"
#include "wappo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace wappo {

const std::vector<std::string> kTrainLogColumns = {
    "update",    "env_steps", "src_return_mean", "tgt_return_mean", "loss_policy",
    "loss_value", "loss_conf", "w_estimate",      "critic_obj",      "wall_ms"};

const std::vector<std::string> kSummaryColumns = {
    "mode", "seed", "final_src_return", "final_tgt_return", "norm_return", "sliced_w1"};

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, int line) {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw SpecError("line " + std::to_string(line) + ": bad number '" + v + "'");
    return d;
}

long parse_long(const std::string& v, int line) {
    std::size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size())
        throw SpecError("line " + std::to_string(line) + ": bad integer '" + v + "'");
    return d;
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw SpecError("line " + std::to_string(line) + ": bad boolean '" + v + "'");
}

// Simple CSV table with named columns.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name, const std::string& file) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw SpecError("file " + file + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw SpecError("empty CSV " + path);
    t.columns = split(trim(line), ',');
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        t.rows.push_back(split(line, ','));
    }
    return t;
}

}  // namespace

ExperimentSpec ExperimentSpec::parse(const std::string& text) {
    ExperimentSpec spec;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw SpecError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (value.empty())
            throw SpecError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");

        auto& b = spec.base;
        if (key == "family") {
            if (!valid_family(value))
                throw SpecError("line " + std::to_string(lineno) + ": unknown family '" + value +
                                "'");
            spec.family = value;
        } else if (key == "modes") {
            spec.modes.clear();
            for (const auto& m : split(value, ',')) {
                try {
                    spec.modes.push_back(parse_mode(trim(m)));
                } catch (const TensorError&) {
                    throw SpecError("line " + std::to_string(lineno) + ": unknown mode '" +
                                    trim(m) + "'");
                }
            }
        } else if (key == "seeds") {
            spec.seeds.clear();
            for (const auto& v : split(value, ','))
                spec.seeds.push_back(static_cast<std::uint64_t>(parse_long(trim(v), lineno)));
            if (spec.seeds.empty())
                throw SpecError("line " + std::to_string(lineno) + ": need at least one seed");
        } else if (key == "output_dir") {
            spec.output_dir = value;
        } else if (key == "total_timesteps") {
            b.total_timesteps = parse_long(value, lineno);
        } else if (key == "horizon") {
            b.ppo.horizon = static_cast<int>(parse_long(value, lineno));
        } else if (key == "epochs") {
            b.ppo.epochs = static_cast<int>(parse_long(value, lineno));
        } else if (key == "minibatch") {
            b.ppo.minibatch = static_cast<std::size_t>(parse_long(value, lineno));
        } else if (key == "lr") {
            b.ppo.lr = parse_double(value, lineno);
        } else if (key == "gamma") {
            b.ppo.gamma = parse_double(value, lineno);
        } else if (key == "gae_lambda") {
            b.ppo.gae_lambda = parse_double(value, lineno);
        } else if (key == "clip_eps") {
            b.ppo.clip_eps = parse_double(value, lineno);
        } else if (key == "value_coef") {
            b.ppo.value_coef = parse_double(value, lineno);
        } else if (key == "entropy_coef") {
            b.ppo.entropy_coef = parse_double(value, lineno);
        } else if (key == "normalize_adv") {
            b.ppo.normalize_adv = parse_bool(value, lineno);
        } else if (key == "lambda_conf") {
            b.confusion.lambda = parse_double(value, lineno);
        } else if (key == "n_critic") {
            b.confusion.n_critic = static_cast<int>(parse_long(value, lineno));
        } else if (key == "clip_c") {
            b.confusion.clip_c = parse_double(value, lineno);
        } else if (key == "critic_lr") {
            b.confusion.critic_lr = parse_double(value, lineno);
        } else if (key == "critic_layers") {
            b.confusion.hidden_layers = static_cast<int>(parse_long(value, lineno));
        } else if (key == "critic_width") {
            b.confusion.hidden_width = static_cast<int>(parse_long(value, lineno));
        } else if (key == "target_buffer") {
            b.target_buffer_capacity = static_cast<std::size_t>(parse_long(value, lineno));
        } else if (key == "refresh_target_buffer") {
            b.refresh_target_buffer = parse_bool(value, lineno);
        } else if (key == "rdr_weight") {
            b.rdr_weight = parse_double(value, lineno);
        } else if (key == "eval_episodes") {
            b.eval_episodes = static_cast<int>(parse_long(value, lineno));
        } else if (key == "final_eval_episodes") {
            b.final_eval_episodes = static_cast<int>(parse_long(value, lineno));
        } else if (key == "eval_every") {
            b.eval_every = static_cast<int>(parse_long(value, lineno));
        } else if (key == "feature_samples") {
            spec.feature_samples = static_cast<int>(parse_long(value, lineno));
        } else if (key == "sliced_directions") {
            spec.sliced_directions = static_cast<int>(parse_long(value, lineno));
        } else {
            throw SpecError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    return spec;
}

ExperimentSpec ExperimentSpec::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open spec file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

namespace {

// 1000 representations per domain for alignment diagnostics: source states
// visited by the trained (stochastic) policy, target states from the same
// random-policy distribution the target buffer uses.
FeatureMatrix collect_features(const PolicyValueNet& policy, Domain& domain, int n, Rng& rng,
                               bool use_policy) {
    NoGradGuard no_grad;
    FeatureMatrix m;
    m.rows = static_cast<std::size_t>(n);
    m.cols = PolicyValueNet::kRepDim;
    m.data.reserve(m.rows * m.cols);
    Observation obs = domain.reset();
    for (int i = 0; i < n; ++i) {
        Tensor x = Tensor::constant({static_cast<std::size_t>(kObsDim)}, obs.pixels);
        Tensor rep = policy.features(x);
        m.data.insert(m.data.end(), rep.data().begin(), rep.data().end());

        int action;
        if (use_policy) {
            PolicyValueNet::Forward fwd = policy.forward(x);
            const auto& logp = fwd.log_prob.data();
            double u = rng.uniform();
            double acc = 0.0;
            action = policy.n_actions() - 1;
            for (int a = 0; a < policy.n_actions(); ++a) {
                acc += std::exp(logp[a]);
                if (u < acc) {
                    action = a;
                    break;
                }
            }
        } else {
            action = static_cast<int>(rng.uniform_int(domain.action_count()));
        }
        StepResult res = domain.step(action);
        obs = res.done ? domain.reset() : res.observation;
    }
    return m;
}

void write_train_log(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw SpecError("cannot write " + path);
    for (std::size_t i = 0; i < kTrainLogColumns.size(); ++i)
        out << (i ? "," : "") << kTrainLogColumns[i];
    out << '\n';
    for (const auto& r : log.rows) {
        out << r.update << ',' << r.env_steps << ',' << fmt(r.src_return_mean) << ','
            << fmt(r.tgt_return_mean) << ',' << fmt(r.loss_policy) << ',' << fmt(r.loss_value)
            << ',' << fmt(r.loss_conf) << ',' << fmt(r.w_estimate) << ',' << fmt(r.critic_obj)
            << ',' << fmt(r.wall_ms) << '\n';
    }
}

void write_features(const std::string& path, const FeatureMatrix& src, const FeatureMatrix& tgt) {
    std::ofstream out(path);
    if (!out) throw SpecError("cannot write " + path);
    out << "domain";
    for (std::size_t c = 0; c < src.cols; ++c) out << ",f" << c;
    out << '\n';
    auto dump = [&](const char* tag, const FeatureMatrix& m) {
        for (std::size_t r = 0; r < m.rows; ++r) {
            out << tag;
            for (std::size_t c = 0; c < m.cols; ++c) out << ',' << fmt(m.at(r, c));
            out << '\n';
        }
    };
    dump("source", src);
    dump("target", tgt);
}

struct SummaryRow {
    std::string mode;
    std::uint64_t seed;
    double final_src, final_tgt, norm_return, sliced;
    bool failed = false;
    std::string failure;
};

}  // namespace

int run_experiment(const ExperimentSpec& spec) {
    fs::create_directories(spec.output_dir);
    std::vector<SummaryRow> summary;
    bool any_abort = false;

    for (TrainMode mode : spec.modes) {
        for (std::uint64_t seed : spec.seeds) {
            auto [src_theme, tgt_theme] = sample_theme_pair(spec.family, seed);
            auto source = make_domain(spec.family, src_theme, seed * 2 + 1, seed);
            auto target = make_domain(spec.family, tgt_theme, seed * 2 + 2, seed);

            WappoConfig cfg = spec.base;
            cfg.mode = mode;
            cfg.seed = seed;
            TrainResult result = wappo_train(cfg, *source, *target);

            std::string stem = mode_name(mode) + "_" + std::to_string(seed);
            write_train_log(spec.output_dir + "/train_log_" + stem + ".csv", result.log);
            save_checkpoint(spec.output_dir + "/ckpt_" + stem + ".txt",
                            result.policy->params());

            SummaryRow row;
            row.mode = mode_name(mode);
            row.seed = seed;
            if (result.aborted) {
                any_abort = true;
                row.failed = true;
                row.failure = result.abort_reason;
                summary.push_back(row);
                continue;
            }

            Rng feat_rng(seed ^ 0xfea75eedull);
            auto src_eval = source->fresh(seed ^ 0xf00d1ull);
            auto tgt_eval = target->fresh(seed ^ 0xf00d2ull);
            FeatureMatrix src_feats = collect_features(*result.policy, *src_eval,
                                                       spec.feature_samples, feat_rng, true);
            FeatureMatrix tgt_feats = collect_features(*result.policy, *tgt_eval,
                                                       spec.feature_samples, feat_rng, false);
            write_features(spec.output_dir + "/features_" + stem + ".csv", src_feats, tgt_feats);

            auto [rmin, rmax] = family_return_bounds(spec.family);
            row.final_src = result.final_src_return;
            row.final_tgt = result.final_tgt_return;
            row.norm_return = normalized_return(result.final_tgt_return, rmin, rmax);
            row.sliced = sliced_w1(src_feats, tgt_feats, spec.sliced_directions, 0xd14ec7ull);
            summary.push_back(row);
        }
    }

    {
        std::ofstream out(spec.output_dir + "/summary.csv");
        for (std::size_t i = 0; i < kSummaryColumns.size(); ++i)
            out << (i ? "," : "") << kSummaryColumns[i];
        out << '\n';
        for (const auto& r : summary) {
            if (r.failed) {
                out << r.mode << ',' << r.seed << ",aborted,aborted,aborted,aborted\n";
            } else {
                out << r.mode << ',' << r.seed << ',' << fmt(r.final_src) << ','
                    << fmt(r.final_tgt) << ',' << fmt(r.norm_return) << ',' << fmt(r.sliced)
                    << '\n';
            }
        }
    }
    report_experiment(spec.output_dir);
    return any_abort ? kExitTrainingAbort : kExitOk;
}

// ---------------------------------------------------------------------------
// Plotting (hand-rolled SVG)
// ---------------------------------------------------------------------------

namespace {

struct Series {
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> sd;
};

const std::map<std::string, std::string> kModeColors = {
    {"wappo", "#2ca02c"}, {"ppo", "#e377c2"}, {"rdr", "#1f77b4"}};

std::string mode_color(const std::string& mode) {
    auto it = kModeColors.find(mode);
    return it != kModeColors.end() ? it->second : "#7f7f7f";
}

struct LinearMap {
    double dmin, dmax, pmin, pmax;
    double operator()(double v) const {
        if (dmax == dmin) return 0.5 * (pmin + pmax);
        return pmin + (v - dmin) / (dmax - dmin) * (pmax - pmin);
    }
};

// Marching-squares iso-lines for one density level; returns segments in
// data coordinates.
std::vector<std::array<double, 4>> contour_segments(const DensityGrid& g, double level) {
    std::vector<std::array<double, 4>> segs;
    auto interp = [&](double va, double vb, double a, double b) {
        double t = (level - va) / (vb - va);
        return a + t * (b - a);
    };
    for (std::size_t j = 0; j + 1 < g.ny; ++j) {
        for (std::size_t i = 0; i + 1 < g.nx; ++i) {
            double x0 = g.x_at(i), x1 = g.x_at(i + 1);
            double y0 = g.y_at(j), y1 = g.y_at(j + 1);
            double v00 = g.values[j * g.nx + i], v10 = g.values[j * g.nx + i + 1];
            double v01 = g.values[(j + 1) * g.nx + i], v11 = g.values[(j + 1) * g.nx + i + 1];
            int c = (v00 >= level) | ((v10 >= level) << 1) | ((v11 >= level) << 2) |
                    ((v01 >= level) << 3);
            if (c == 0 || c == 15) continue;

            // edge midpoints by linear interpolation
            double bx = interp(v00, v10, x0, x1), by = y0;              // bottom
            double tx = interp(v01, v11, x0, x1), ty = y1;              // top
            double lx = x0, ly = interp(v00, v01, y0, y1);              // left
            double rx = x1, ry = interp(v10, v11, y0, y1);              // right
            auto add = [&](double ax, double ay, double bx2, double by2) {
                segs.push_back({ax, ay, bx2, by2});
            };
            switch (c) {
                case 1: case 14: add(lx, ly, bx, by); break;
                case 2: case 13: add(bx, by, rx, ry); break;
                case 3: case 12: add(lx, ly, rx, ry); break;
                case 4: case 11: add(tx, ty, rx, ry); break;
                case 6: case 9: add(bx, by, tx, ty); break;
                case 7: case 8: add(lx, ly, tx, ty); break;
                case 5: case 10: {
                    double center = 0.25 * (v00 + v10 + v01 + v11);
                    bool flip = (center >= level) == (c == 5);
                    if (flip) {
                        add(lx, ly, bx, by);
                        add(tx, ty, rx, ry);
                    } else {
                        add(lx, ly, tx, ty);
                        add(bx, by, rx, ry);
                    }
                    break;
                }
                default: break;
            }
        }
    }
    return segs;
}

struct TrialLog {
    std::string mode;
    std::uint64_t seed;
    std::vector<double> env_steps, src, tgt;
};

std::vector<TrialLog> load_train_logs(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.rfind("train_log_", 0) == 0 && e.path().extension() == ".csv")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<TrialLog> logs;
    for (const auto& f : files) {
        std::string stem = f.stem().string().substr(std::string("train_log_").size());
        auto parts = split(stem, '_');
        if (parts.size() != 2) continue;
        CsvTable t = read_csv(f.string());
        std::size_t c_steps = t.column("env_steps", f.string());
        std::size_t c_src = t.column("src_return_mean", f.string());
        std::size_t c_tgt = t.column("tgt_return_mean", f.string());
        TrialLog log;
        log.mode = parts[0];
        log.seed = std::stoull(parts[1]);
        for (const auto& r : t.rows) {
            log.env_steps.push_back(std::stod(r[c_steps]));
            log.src.push_back(std::stod(r[c_src]));
            log.tgt.push_back(std::stod(r[c_tgt]));
        }
        logs.push_back(std::move(log));
    }
    if (logs.empty()) throw SpecError("no train_log_*.csv files in " + dir);
    return logs;
}

Series aggregate(const std::vector<const TrialLog*>& trials, bool target) {
    std::size_t n = trials[0]->env_steps.size();
    for (const auto* t : trials) n = std::min(n, t->env_steps.size());
    Series s;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto* t : trials) sum += (target ? t->tgt : t->src)[i];
        double mean = sum / trials.size();
        double var = 0.0;
        for (const auto* t : trials) {
            double v = (target ? t->tgt : t->src)[i] - mean;
            var += v * v;
        }
        s.x.push_back(trials[0]->env_steps[i]);
        s.mean.push_back(mean);
        s.sd.push_back(std::sqrt(var / trials.size()));
    }
    return s;
}

std::string polyline_points(const std::vector<double>& xs, const std::vector<double>& ys,
                            const LinearMap& mx, const LinearMap& my) {
    std::string pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) pts += ' ';
        pts += fmt6(mx(xs[i])) + "," + fmt6(my(ys[i]));
    }
    return pts;
}

}  // namespace

void plot_experiment(const std::string& log_dir) {
    auto logs = load_train_logs(log_dir);

    std::map<std::string, std::vector<const TrialLog*>> by_mode;
    for (const auto& l : logs) by_mode[l.mode].push_back(&l);

    // ---- learning curves ----
    double xmax = 0.0, ymin = 0.0, ymax = 1.0;
    std::map<std::string, std::pair<Series, Series>> series;  // mode -> (src, tgt)
    for (auto& [mode, trials] : by_mode) {
        Series src = aggregate(trials, false), tgt = aggregate(trials, true);
        for (std::size_t i = 0; i < src.x.size(); ++i) {
            xmax = std::max(xmax, src.x[i]);
            ymin = std::min({ymin, src.mean[i] - src.sd[i], tgt.mean[i] - tgt.sd[i]});
            ymax = std::max({ymax, src.mean[i] + src.sd[i], tgt.mean[i] + tgt.sd[i]});
        }
        series[mode] = {std::move(src), std::move(tgt)};
    }

    const double W = 720, H = 420, ml = 60, mr = 20, mt = 30, mb = 45;
    LinearMap mx{0.0, xmax, ml, W - mr};
    LinearMap my{ymin, ymax, H - mb, mt};

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double xv = xmax * k / 4.0, yv = ymin + (ymax - ymin) * k / 4.0;
        svg << "<text x=\"" << fmt6(mx(xv)) << "\" y=\"" << H - mb + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt6(xv) << "</text>\n";
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << fmt6(my(yv) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << fmt6(yv) << "</text>\n";
    }
    svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 8
        << "\" font-size=\"12\" text-anchor=\"middle\">environment steps</text>\n"
        << "<text x=\"14\" y=\"" << (mt + H - mb) / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << (mt + H - mb) / 2 << ")\">episode return</text>\n";

    double ly = mt + 4;
    for (auto& [mode, pair] : series) {
        const auto& [src, tgt] = pair;
        std::string color = mode_color(mode);
        // std band around the target curve
        std::string band;
        for (std::size_t i = 0; i < tgt.x.size(); ++i)
            band += fmt6(mx(tgt.x[i])) + "," + fmt6(my(tgt.mean[i] + tgt.sd[i])) + " ";
        for (std::size_t i = tgt.x.size(); i-- > 0;)
            band += fmt6(mx(tgt.x[i])) + "," + fmt6(my(tgt.mean[i] - tgt.sd[i])) + " ";
        svg << "<polygon points=\"" << band << "\" fill=\"" << color
            << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        svg << "<polyline points=\"" << polyline_points(src.x, src.mean, mx, my)
            << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>\n";
        svg << "<polyline points=\"" << polyline_points(tgt.x, tgt.mean, mx, my)
            << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.6\" stroke-dasharray=\"6 4\"/>\n";
        svg << "<text x=\"" << W - mr - 120 << "\" y=\"" << fmt6(ly)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << mode
            << " (solid src / dashed tgt)</text>\n";
        ly += 16;
    }
    svg << "</svg>\n";
    {
        std::ofstream out(log_dir + "/learning_curves.svg");
        if (!out) throw SpecError("cannot write learning_curves.svg");
        out << svg.str();
    }

    // ---- feature densities ----
    std::ostringstream fsvg;
    const double PW = 300, PH = 300, pad = 40;
    std::vector<std::string> modes;
    for (auto& [mode, trials] : by_mode) modes.push_back(mode);
    double total_w = pad + modes.size() * (PW + pad);
    fsvg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\""
         << PH + 2 * pad << "\" viewBox=\"0 0 " << total_w << " " << PH + 2 * pad << "\">\n"
         << "<rect width=\"" << total_w << "\" height=\"" << PH + 2 * pad
         << "\" fill=\"white\"/>\n";

    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        const std::string& mode = modes[mi];
        std::uint64_t seed = by_mode[mode][0]->seed;
        std::string fpath =
            log_dir + "/features_" + mode + "_" + std::to_string(seed) + ".csv";
        if (!fs::exists(fpath)) continue;
        CsvTable t = read_csv(fpath);
        std::size_t c_dom = t.column("domain", fpath);
        std::size_t dim = t.columns.size() - 1;
        FeatureMatrix all;
        all.cols = dim;
        std::vector<bool> is_target;
        for (const auto& r : t.rows) {
            is_target.push_back(r[c_dom] == "target");
            for (std::size_t c = 0; c < dim; ++c) all.data.push_back(std::stod(r[c + 1]));
            ++all.rows;
        }
        Pca2d proj = pca_2d(all);
        std::vector<double> src_pts, tgt_pts;
        for (std::size_t r = 0; r < all.rows; ++r) {
            auto& dst = is_target[r] ? tgt_pts : src_pts;
            dst.push_back(proj.points[r * 2]);
            dst.push_back(proj.points[r * 2 + 1]);
        }

        double ox = pad + mi * (PW + pad);
        fsvg << "<text x=\"" << ox + PW / 2 << "\" y=\"" << pad - 10
             << "\" font-size=\"13\" text-anchor=\"middle\">" << mode << "</text>\n"
             << "<rect x=\"" << ox << "\" y=\"" << pad << "\" width=\"" << PW << "\" height=\""
             << PH << "\" fill=\"none\" stroke=\"black\"/>\n";

        double xmn = proj.points[0], xmx = xmn, ymn = proj.points[1], ymx = ymn;
        for (std::size_t r = 0; r < all.rows; ++r) {
            xmn = std::min(xmn, proj.points[r * 2]);
            xmx = std::max(xmx, proj.points[r * 2]);
            ymn = std::min(ymn, proj.points[r * 2 + 1]);
            ymx = std::max(ymx, proj.points[r * 2 + 1]);
        }
        LinearMap pmx{xmn, xmx, ox + 8, ox + PW - 8};
        LinearMap pmy{ymn, ymx, pad + PH - 8, pad + 8};

        auto draw_contours = [&](const std::vector<double>& pts, const std::string& color) {
            if (pts.size() < 2) return;
            DensityGrid g = gaussian_kde(pts, scott_bandwidth(pts), 48, 2.0);
            double peak = *std::max_element(g.values.begin(), g.values.end());
            for (double frac : {0.2, 0.4, 0.6, 0.8}) {
                for (const auto& s : contour_segments(g, frac * peak)) {
                    fsvg << "<line x1=\"" << fmt6(pmx(s[0])) << "\" y1=\"" << fmt6(pmy(s[1]))
                         << "\" x2=\"" << fmt6(pmx(s[2])) << "\" y2=\"" << fmt6(pmy(s[3]))
                         << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
                }
            }
        };
        draw_contours(src_pts, "#7f7f7f");   // source: gray
        draw_contours(tgt_pts, "#9467bd");   // target: purple
    }
    fsvg << "</svg>\n";
    {
        std::ofstream out(log_dir + "/feature_density.svg");
        if (!out) throw SpecError("cannot write feature_density.svg");
        out << fsvg.str();
    }
}

void report_experiment(const std::string& log_dir) {
    std::string spath = log_dir + "/summary.csv";
    CsvTable t = read_csv(spath);
    std::size_t c_mode = t.column("mode", spath);
    std::size_t c_tgt = t.column("final_tgt_return", spath);
    std::size_t c_norm = t.column("norm_return", spath);
    std::size_t c_sliced = t.column("sliced_w1", spath);

    struct Agg {
        std::vector<double> tgt, norm, sliced;
        int failures = 0;
    };
    std::map<std::string, Agg> by_mode;
    for (const auto& r : t.rows) {
        Agg& a = by_mode[r[c_mode]];
        if (r[c_tgt] == "aborted") {
            a.failures += 1;
            continue;
        }
        a.tgt.push_back(std::stod(r[c_tgt]));
        a.norm.push_back(std::stod(r[c_norm]));
        a.sliced.push_back(std::stod(r[c_sliced]));
    }

    auto mean_sd = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {0.0, 0.0};
        double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        return {m, std::sqrt(var / v.size())};
    };

    std::ofstream out(log_dir + "/report.txt");
    if (!out) throw SpecError("cannot write report.txt");
    out << "mode  target_return(mean+-sd)  norm_return(mean+-sd)  sliced_w1(mean+-sd)  failures\n";
    std::vector<std::pair<double, std::string>> ranking;
    for (const auto& [mode, a] : by_mode) {
        auto [tm, ts] = mean_sd(a.tgt);
        auto [nm, ns] = mean_sd(a.norm);
        auto [sm, ss] = mean_sd(a.sliced);
        out << mode << "  " << fmt6(tm) << " +- " << fmt6(ts) << "  " << fmt6(nm) << " +- "
            << fmt6(ns) << "  " << fmt6(sm) << " +- " << fmt6(ss) << "  " << a.failures << '\n';
        ranking.emplace_back(tm, mode);
    }
    std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    out << "target return ordering: ";
    for (std::size_t i = 0; i < ranking.size(); ++i)
        out << (i ? " > " : "") << ranking[i].second;
    out << '\n';
}

}  // namespace wappo
