#include "transfact/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "transfact/binio.hpp"
#include "transfact/error.hpp"
#include "transfact/parallel.hpp"

namespace transfact {

double ConfusionCounts::accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
}

ConfusionCounts confusion(const std::vector<int>& preds, const std::vector<int>& labels, int positive_class) {
    require(preds.size() == labels.size(), ErrorKind::Input,
            "prediction/label length mismatch: " + std::to_string(preds.size()) + " vs " +
                std::to_string(labels.size()));
    require(!preds.empty(), ErrorKind::Input, "no predictions to score");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == positive_class;
        const bool l = labels[i] == positive_class;
        if (p && l) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (l) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

Prf1 prf1(const std::vector<int>& preds, const std::vector<int>& labels, int positive_class) {
    const auto c = confusion(preds, labels, positive_class);
    Prf1 r;
    r.accuracy = c.accuracy();
    if (c.tp + c.fp > 0) {
        r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        r.degenerate = true;
    }
    if (c.tp + c.fn > 0) {
        r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        r.degenerate = true;
    }
    if (r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    } else {
        r.degenerate = true;
    }
    return r;
}

RunAggregate aggregate_runs(const std::vector<double>& values, std::string metric) {
    require(!values.empty(), ErrorKind::Input, "no runs to aggregate");
    RunAggregate a;
    a.metric = std::move(metric);
    a.values = values;
    // sorted summation keeps the result independent of seed order
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    a.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    if (sorted.size() > 1) {
        double ss = 0.0;
        for (double v : sorted) {
            ss += (v - a.mean) * (v - a.mean);
        }
        a.std = std::sqrt(ss / (n - 1.0));
    }
    return a;
}

WilcoxonResult wilcoxon_signed_rank_exact(const std::vector<double>& differences, bool two_sided) {
    std::vector<double> d;
    for (double x : differences) {
        require(std::isfinite(x), ErrorKind::Input, "non-finite paired difference");
        if (x != 0.0) {
            d.push_back(x);
        }
    }
    if (d.empty()) {
        fail(ErrorKind::UndefinedTest, "all paired differences are zero");
    }
    require(d.size() <= 20, ErrorKind::Input,
            "exact enumeration supports at most 20 non-zero differences, got " + std::to_string(d.size()));
    const int n = static_cast<int>(d.size());

    // Doubled average ranks are integers.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<int> rank2(n);
    for (int i = 0; i < n;) {
        int j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) {
            ++j;
        }
        // positions i..j hold ranks i+1..j+1, average doubled = i+j+2
        for (int k = i; k <= j; ++k) {
            rank2[order[k]] = i + j + 2;
        }
        i = j + 1;
    }
    int total2 = 0;
    int wplus2 = 0;
    for (int i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (d[i] > 0) {
            wplus2 += rank2[i];
        }
    }

    // Count of sign patterns per doubled W+.
    std::vector<std::uint64_t> dist(total2 + 1, 0);
    dist[0] = 1;
    for (int i = 0; i < n; ++i) {
        for (int s = total2; s >= rank2[i]; --s) {
            dist[s] += dist[s - rank2[i]];
        }
    }
    WilcoxonResult r;
    r.n = n;
    r.w_plus = wplus2 / 2.0;
    r.w_minus = (total2 - wplus2) / 2.0;
    r.pattern_count = std::uint64_t{1} << n;
    // compare 2*W+ against total2/2 using 4x-scaled integers to stay exact
    const int centre4 = total2;
    const int obs_dev4 = std::abs(2 * wplus2 - centre4);
    for (int s = 0; s <= total2; ++s) {
        if (dist[s] == 0) {
            continue;
        }
        const bool extreme = two_sided ? std::abs(2 * s - centre4) >= obs_dev4 : s >= wplus2;
        if (extreme) {
            r.extreme_count += dist[s];
        }
    }
    r.p_value = static_cast<double>(r.extreme_count) / static_cast<double>(r.pattern_count);
    return r;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() >= 2 && b.size() >= 2, ErrorKind::Input, "Cohen's d needs at least 2 values per sample");
    const auto ra = aggregate_runs(a);
    const auto rb = aggregate_runs(b);
    const double diff = ra.mean - rb.mean;
    const double pooled = std::sqrt((ra.std * ra.std + rb.std * rb.std) / 2.0);
    if (pooled == 0.0) {
        if (diff == 0.0) {
            return 0.0;
        }
        fail(ErrorKind::UndefinedTest, "Cohen's d undefined: both samples have zero variance");
    }
    return diff / pooled;
}

EvalMetrics evaluate_predictions(const std::vector<Prediction>& preds) {
    require(!preds.empty(), ErrorKind::Input, "no predictions to evaluate");
    std::vector<int> p;
    std::vector<int> l;
    std::size_t frames = 0;
    std::size_t frame_correct = 0;
    for (const auto& x : preds) {
        p.push_back(x.transfer);
        l.push_back(x.truth);
        require(x.stages.size() == x.stage_truth.size(), ErrorKind::Input, "stage prediction length mismatch");
        for (std::size_t t = 0; t < x.stages.size(); ++t) {
            frame_correct += x.stages[t] == x.stage_truth[t] ? 1 : 0;
        }
        frames += x.stages.size();
    }
    EvalMetrics m;
    m.videos = preds.size();
    m.transferable = prf1(p, l, static_cast<int>(Transfer::T));
    m.non_transferable = prf1(p, l, static_cast<int>(Transfer::NT));
    m.accuracy = m.transferable.accuracy;
    m.frame_accuracy = frames == 0 ? 0.0 : static_cast<double>(frame_correct) / static_cast<double>(frames);
    return m;
}

namespace {

nlohmann::json prf_json(const Prf1& r) {
    return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"degenerate", r.degenerate}};
}

} // namespace

nlohmann::json to_json(const EvalMetrics& m) {
    return {{"videos", m.videos},
            {"accuracy", m.accuracy},
            {"frame_accuracy", m.frame_accuracy},
            {"T", prf_json(m.transferable)},
            {"NT", prf_json(m.non_transferable)}};
}

std::vector<SweepPoint> truncation_sweep(const std::function<double(int, int)>& run, const std::vector<int>& lengths,
                                         int full_length, int seeds, int jobs) {
    require(!lengths.empty(), ErrorKind::Config, "truncation sweep needs at least one length");
    require(seeds >= 1, ErrorKind::Config, "truncation sweep needs at least one seed");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] < kMinContext) {
            fail(ErrorKind::Config, "sweep length " + std::to_string(lengths[i]) + " below minimum context " +
                                        std::to_string(kMinContext));
        }
        require(lengths[i] <= full_length, ErrorKind::Config,
                "sweep length " + std::to_string(lengths[i]) + " exceeds video length " +
                    std::to_string(full_length));
        require(i == 0 || lengths[i] > lengths[i - 1], ErrorKind::Config, "sweep lengths must be strictly ascending");
    }
    const std::size_t tasks = lengths.size() * static_cast<std::size_t>(seeds);
    std::vector<double> acc(tasks, 0.0);
    parallel_for(tasks, jobs, [&](std::size_t k) { acc[k] = run(lengths[k / seeds], static_cast<int>(k % seeds)); });
    std::vector<SweepPoint> out;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        std::vector<double> v(acc.begin() + i * seeds, acc.begin() + (i + 1) * seeds);
        out.push_back({lengths[i], aggregate_runs(v, "accuracy@" + std::to_string(lengths[i]))});
    }
    return out;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os << std::setprecision(17) << "length,mean_acc,std_acc\n";
    for (const auto& p : points) {
        os << p.length << ',' << p.accuracy.mean << ',' << p.accuracy.std << '\n';
    }
    binio::write_text(path, os.str());
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != ' ' && c != '\t') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

} // namespace

std::vector<SweepPoint> read_sweep_csv(const std::filesystem::path& path) {
    std::istringstream in(binio::read_text(path));
    std::string line;
    std::vector<SweepPoint> out;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) {
            continue;
        }
        const auto f = split_fields(line);
        double len = 0;
        SweepPoint p;
        if (f.size() != 3 || !parse_double(f[0], len) || !parse_double(f[1], p.accuracy.mean) ||
            !parse_double(f[2], p.accuracy.std)) {
            fail(ErrorKind::Parse, path.string() + ": malformed sweep row at line " + std::to_string(lineno));
        }
        p.length = static_cast<int>(len);
        out.push_back(p);
    }
    return out;
}

std::vector<double> read_runs_csv(const std::filesystem::path& path) {
    std::istringstream in(binio::read_text(path));
    std::string line;
    std::vector<double> out;
    int column = 0;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const auto f = split_fields(line);
        if (f.size() == 1 && f[0].empty()) {
            continue;
        }
        double v = 0;
        if (!header_seen && out.empty() && !parse_double(f[0], v)) {
            header_seen = true;
            const auto it = std::find(f.begin(), f.end(), "accuracy");
            column = it == f.end() ? 0 : static_cast<int>(it - f.begin());
            continue;
        }
        if (column >= static_cast<int>(f.size()) || !parse_double(f[column], v)) {
            fail(ErrorKind::Parse, path.string() + ": non-numeric run value at line " + std::to_string(lineno));
        }
        out.push_back(v);
    }
    require(!out.empty(), ErrorKind::Input, path.string() + ": no run values");
    return out;
}

} // namespace transfact
