#include "repairenv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "repairenv/error.hpp"
#include "repairenv/tool_protocol.hpp"

namespace repairenv {

using nlohmann::ordered_json;

std::vector<std::pair<ErrorCategory, CategoryShare>> category_distribution(const std::vector<std::string>& corpus,
                                                                           const CategorizeOptions& options) {
    if (corpus.empty()) throw Error(Errc::InvalidArgument, "empty error corpus");
    std::map<ErrorCategory, std::size_t> counts;
    for (const auto& text : corpus) ++counts[categorize_error(text, options)];
    std::vector<std::pair<ErrorCategory, CategoryShare>> out;
    for (auto c : kAllErrorCategories) {
        auto it = counts.find(c);
        if (it == counts.end()) continue;
        out.push_back({c, {it->second, static_cast<double>(it->second) / static_cast<double>(corpus.size())}});
    }
    return out;
}

std::optional<double> TransitionMatrix::probability(const std::string& from, const std::string& to) const {
    auto row = probabilities.find(from);
    if (row == probabilities.end()) return std::nullopt;
    auto cell = row->second.find(to);
    return cell == row->second.end() ? 0.0 : cell->second;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<std::string> order_tools(const std::set<std::string>& seen) {
    std::vector<std::string> out;
    for (const auto& s : tool_schemas())
        if (seen.contains(std::string(s.name))) out.emplace_back(s.name);
    for (const auto& t : seen)
        if (!find_schema(t)) out.push_back(t);
    return out;
}

}  // namespace

std::string TransitionMatrix::to_csv() const {
    std::string out = "from";
    for (const auto& t : tools) out += "," + t;
    out += ",usage\n";
    for (const auto& from : tools) {
        out += from;
        for (const auto& to : tools) {
            out += ",";
            if (auto p = probability(from, to)) out += fmt(*p);
        }
        out += "," + fmt(usage.at(from)) + "\n";
    }
    return out;
}

ordered_json TransitionMatrix::to_json() const {
    ordered_json j;
    j["tools"] = tools;
    j["probabilities"] = ordered_json::object();
    for (const auto& from : tools) {
        if (!has_row(from)) {
            j["probabilities"][from] = nullptr;
            continue;
        }
        ordered_json row = ordered_json::object();
        for (const auto& to : tools) row[to] = *probability(from, to);
        j["probabilities"][from] = row;
    }
    j["usage"] = ordered_json::object();
    for (const auto& t : tools) j["usage"][t] = usage.at(t);
    j["call_counts"] = ordered_json::object();
    for (const auto& t : tools) j["call_counts"][t] = call_counts.at(t);
    return j;
}

TransitionMatrix transition_matrix(const std::vector<std::vector<std::string>>& sequences) {
    TransitionMatrix m;
    std::size_t total = 0;
    std::set<std::string> seen;
    for (const auto& seq : sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            ++m.call_counts[seq[i]];
            ++total;
            seen.insert(seq[i]);
            if (i + 1 < seq.size()) ++m.transition_counts[seq[i]][seq[i + 1]];
        }
    }
    if (total == 0) throw Error(Errc::NoTransitions, "no tool calls in the input");
    m.tools = order_tools(seen);
    for (const auto& [from, row] : m.transition_counts) {
        std::size_t out_total = 0;
        for (const auto& [_, n] : row) out_total += n;
        for (const auto& [to, n] : row)
            m.probabilities[from][to] = static_cast<double>(n) / static_cast<double>(out_total);
    }
    for (const auto& [tool, n] : m.call_counts) m.usage[tool] = static_cast<double>(n) / static_cast<double>(total);
    return m;
}

TransitionMatrix transition_matrix(const std::vector<Trajectory>& trajectories) {
    std::vector<std::vector<std::string>> seqs;
    seqs.reserve(trajectories.size());
    for (const auto& t : trajectories) seqs.push_back(t.tool_sequence());
    return transition_matrix(seqs);
}

std::string transition_delta_csv(const TransitionMatrix& before, const TransitionMatrix& after) {
    std::set<std::string> seen(before.tools.begin(), before.tools.end());
    seen.insert(after.tools.begin(), after.tools.end());
    const auto tools = order_tools(seen);
    std::string out = "from";
    for (const auto& t : tools) out += "," + t;
    out += ",usage\n";
    for (const auto& from : tools) {
        out += from;
        for (const auto& to : tools) {
            out += ",";
            auto a = before.probability(from, to);
            auto b = after.probability(from, to);
            if (a && b) out += fmt(*b - *a);
        }
        const double ua = before.usage.contains(from) ? before.usage.at(from) : 0.0;
        const double ub = after.usage.contains(from) ? after.usage.at(from) : 0.0;
        out += "," + fmt(ub - ua) + "\n";
    }
    return out;
}

std::string_view to_string(Outcome o) noexcept {
    switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::Total: return "total";
    }
    return "total";
}

StatsSummary summarize(const std::vector<double>& values, const std::string& metric, Outcome outcome) {
    if (values.empty()) throw Error(Errc::InvalidArgument, "no values for " + metric);
    StatsSummary s;
    s.metric = metric;
    s.outcome = outcome;
    s.count = values.size();
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.ci95_half_width = 1.96 * std::sqrt(ss / n) / std::sqrt(n);
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

namespace {

template <typename Metric>
std::vector<StatsSummary> stratified(const std::vector<Trajectory>& trajectories, const std::string& name, Metric metric) {
    std::vector<double> ok, bad, all;
    for (const auto& t : trajectories) {
        const double v = metric(t);
        (t.succeeded() ? ok : bad).push_back(v);
        all.push_back(v);
    }
    std::vector<StatsSummary> out;
    if (!ok.empty()) out.push_back(summarize(ok, name, Outcome::Success));
    if (!bad.empty()) out.push_back(summarize(bad, name, Outcome::Failure));
    if (!all.empty()) out.push_back(summarize(all, name, Outcome::Total));
    return out;
}

TokenCounts trajectory_tokens(const Trajectory& t, const Tokenizer& tokenizer) {
    TokenCounts sum;
    for (const auto& turn : t.turns) sum += count_tokens(turn, tokenizer);
    return sum;
}

std::map<std::string, double> normalize(const std::map<std::string, std::size_t>& counts) {
    std::size_t total = 0;
    for (const auto& [_, n] : counts) total += n;
    std::map<std::string, double> out;
    if (total == 0) return out;
    for (const auto& [k, n] : counts) out[k] = static_cast<double>(n) / static_cast<double>(total);
    return out;
}

}  // namespace

std::vector<StatsSummary> turn_stats(const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw Error(Errc::InvalidArgument, "no trajectories");
    return stratified(trajectories, "turns", [](const Trajectory& t) { return static_cast<double>(t.assistant_turns()); });
}

std::vector<StatsSummary> token_stats(const std::vector<Trajectory>& trajectories, const Tokenizer& tokenizer) {
    if (trajectories.empty()) throw Error(Errc::InvalidArgument, "no trajectories");
    return stratified(trajectories, "tokens", [&tokenizer](const Trajectory& t) {
        return static_cast<double>(trajectory_tokens(t, tokenizer).total());
    });
}

std::map<std::string, double> fold_minor_categories(const std::map<std::string, double>& fractions, double threshold) {
    std::map<std::string, double> out;
    double other = 0.0;
    bool folded = false;
    for (const auto& [k, v] : fractions) {
        if (v < threshold) {
            other += v;
            folded = true;
        } else {
            out[k] += v;
        }
    }
    if (folded) out["other"] += other;
    return out;
}

std::vector<TokenBreakdown> token_breakdown(const std::vector<Trajectory>& trajectories, const Tokenizer& tokenizer) {
    if (trajectories.empty()) throw Error(Errc::InvalidArgument, "no trajectories");
    std::map<Outcome, std::map<std::string, std::size_t>> counts;
    std::set<Outcome> present;
    for (const auto& t : trajectories) {
        const auto cats = trajectory_tokens(t, tokenizer).by_category();
        const auto stratum = t.succeeded() ? Outcome::Success : Outcome::Failure;
        present.insert(stratum);
        present.insert(Outcome::Total);
        for (const auto& [k, n] : cats) {
            counts[stratum][k] += n;
            counts[Outcome::Total][k] += n;
        }
    }
    std::vector<TokenBreakdown> out;
    for (auto o : {Outcome::Success, Outcome::Failure, Outcome::Total}) {
        if (!present.contains(o)) continue;
        TokenBreakdown b;
        b.outcome = o;
        b.counts = counts[o];
        b.fractions = normalize(b.counts);
        auto without = b.counts;
        without.erase("thinking");
        b.fractions_excluding = normalize(without);
        b.display = fold_minor_categories(b.fractions);
        b.display_excluding = fold_minor_categories(b.fractions_excluding);
        out.push_back(std::move(b));
    }
    return out;
}

namespace {

int decade_of(double x) {
    int k = static_cast<int>(std::floor(std::log10(x)));
    while (std::pow(10.0, k) > x) --k;
    while (std::pow(10.0, k + 1) <= x) ++k;
    return k;
}

}  // namespace

BuildTimeStats build_time_stats(const std::vector<double>& durations_s, std::size_t bins_per_decade, Outcome outcome) {
    if (durations_s.empty()) throw Error(Errc::InvalidArgument, "no build durations");
    if (bins_per_decade == 0) throw Error(Errc::InvalidArgument, "bins_per_decade must be at least 1");
    BuildTimeStats s;
    s.summary = summarize(durations_s, "build_seconds", outcome);
    std::vector<double> positive;
    for (double d : durations_s) (d > 0.0 ? positive.push_back(d) : void(++s.nonpositive));
    if (positive.empty()) return s;

    const int lo = decade_of(*std::min_element(positive.begin(), positive.end()));
    const int hi = decade_of(*std::max_element(positive.begin(), positive.end())) + 1;
    const auto steps = static_cast<std::size_t>(hi - lo) * bins_per_decade;
    std::vector<double> edges;
    for (std::size_t i = 0; i <= steps; ++i) {
        const auto decade = lo + static_cast<int>(i / bins_per_decade);
        const auto frac = static_cast<double>(i % bins_per_decade) / static_cast<double>(bins_per_decade);
        edges.push_back(i % bins_per_decade == 0 ? std::pow(10.0, decade) : std::pow(10.0, decade + frac));
    }
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) s.histogram.push_back({edges[i], edges[i + 1], 0});
    for (double d : positive) {
        auto it = std::upper_bound(edges.begin(), edges.end(), d);
        auto idx = static_cast<std::size_t>(std::distance(edges.begin(), it));
        idx = idx == 0 ? 0 : idx - 1;
        if (idx >= s.histogram.size()) idx = s.histogram.size() - 1;
        ++s.histogram[idx].count;
    }
    return s;
}

std::vector<BuildTimeStats> build_time_stats(const std::vector<Trajectory>& trajectories, std::size_t bins_per_decade) {
    std::vector<double> ok, bad, all;
    for (const auto& t : trajectories) {
        for (const auto& turn : t.turns) {
            if (!turn.build) continue;
            (t.succeeded() ? ok : bad).push_back(turn.build->duration_s);
            all.push_back(turn.build->duration_s);
        }
    }
    std::vector<BuildTimeStats> out;
    if (!ok.empty()) out.push_back(build_time_stats(ok, bins_per_decade, Outcome::Success));
    if (!bad.empty()) out.push_back(build_time_stats(bad, bins_per_decade, Outcome::Failure));
    if (!all.empty()) out.push_back(build_time_stats(all, bins_per_decade, Outcome::Total));
    return out;
}

std::optional<std::string> prompt_error_text(const Trajectory& trajectory) {
    if (trajectory.turns.empty() || trajectory.turns.front().role != Role::System) return std::nullopt;
    const auto& raw = trajectory.turns.front().raw;
    static constexpr std::string_view kStart = "\n\nBuild Error:\n";
    static constexpr std::string_view kEnd = "\n\nRecommended Fix:\n";
    const auto a = raw.find(kStart);
    if (a == std::string::npos) return std::nullopt;
    const auto b = raw.find(kEnd, a + kStart.size());
    if (b == std::string::npos) return std::nullopt;
    return raw.substr(a + kStart.size(), b - a - kStart.size());
}

namespace {

ordered_json stats_json(const StatsSummary& s) {
    return {{"metric", s.metric},       {"outcome", std::string(to_string(s.outcome))},
            {"mean", s.mean},           {"ci95_half_width", s.ci95_half_width},
            {"count", s.count},         {"min", s.min},
            {"max", s.max}};
}

ordered_json fractions_json(const std::map<std::string, double>& m) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

}  // namespace

ordered_json analysis_report(const std::vector<Trajectory>& trajectories, const std::vector<std::string>& error_corpus,
                             const Tokenizer& tokenizer) {
    if (trajectories.empty()) throw Error(Errc::InvalidArgument, "no trajectories");
    ordered_json j;
    j["trajectories"] = trajectories.size();
    j["successes"] = std::count_if(trajectories.begin(), trajectories.end(), [](const auto& t) { return t.succeeded(); });

    j["category_distribution"] = ordered_json::object();
    if (!error_corpus.empty()) {
        for (const auto& [cat, share] : category_distribution(error_corpus))
            j["category_distribution"][std::string(to_string(cat))] = {{"count", share.count}, {"fraction", share.fraction}};
    }

    j["turn_stats"] = ordered_json::array();
    for (const auto& s : turn_stats(trajectories)) j["turn_stats"].push_back(stats_json(s));
    j["token_stats"] = ordered_json::array();
    for (const auto& s : token_stats(trajectories, tokenizer)) j["token_stats"].push_back(stats_json(s));

    j["token_breakdown"] = ordered_json::array();
    for (const auto& b : token_breakdown(trajectories, tokenizer)) {
        ordered_json counts = ordered_json::object();
        for (const auto& [k, n] : b.counts) counts[k] = n;
        j["token_breakdown"].push_back({{"outcome", std::string(to_string(b.outcome))},
                                        {"counts", counts},
                                        {"fractions", fractions_json(b.fractions)},
                                        {"fractions_excluding_thinking", fractions_json(b.fractions_excluding)},
                                        {"display", fractions_json(b.display)},
                                        {"display_excluding_thinking", fractions_json(b.display_excluding)}});
    }

    j["build_time_stats"] = ordered_json::array();
    for (const auto& b : build_time_stats(trajectories)) {
        ordered_json hist = ordered_json::array();
        for (const auto& bin : b.histogram) hist.push_back({{"lower", bin.lower}, {"upper", bin.upper}, {"count", bin.count}});
        j["build_time_stats"].push_back({{"summary", stats_json(b.summary)}, {"histogram", hist}, {"nonpositive", b.nonpositive}});
    }

    try {
        j["transition_matrix"] = transition_matrix(trajectories).to_json();
    } catch (const Error& e) {
        if (e.code() != Errc::NoTransitions) throw;
        j["transition_matrix"] = nullptr;
    }
    return j;
}

std::string plot_data_csv(const ordered_json& report) {
    std::string out = "series,category,value\n";
    auto row = [&out](const std::string& series, const std::string& category, double value) {
        out += series + "," + category + "," + fmt(value) + "\n";
    };
    if (report.contains("category_distribution"))
        for (const auto& [cat, v] : report["category_distribution"].items()) row("error_category", cat, v["fraction"].get<double>());
    if (report.contains("token_breakdown")) {
        for (const auto& b : report["token_breakdown"]) {
            const auto o = b["outcome"].get<std::string>();
            for (const auto& [cat, v] : b["display"].items()) row("tokens_" + o, cat, v.get<double>());
            for (const auto& [cat, v] : b["display_excluding_thinking"].items())
                row("tokens_no_thinking_" + o, cat, v.get<double>());
        }
    }
    if (report.contains("turn_stats"))
        for (const auto& s : report["turn_stats"]) row("turns_mean", s["outcome"].get<std::string>(), s["mean"].get<double>());
    if (report.contains("build_time_stats")) {
        for (const auto& b : report["build_time_stats"]) {
            const auto o = b["summary"]["outcome"].get<std::string>();
            for (const auto& bin : b["histogram"])
                row("build_seconds_" + o, fmt(bin["lower"].get<double>()) + "-" + fmt(bin["upper"].get<double>()),
                    static_cast<double>(bin["count"].get<std::size_t>()));
        }
    }
    if (report.contains("transition_matrix") && !report["transition_matrix"].is_null())
        for (const auto& [tool, u] : report["transition_matrix"]["usage"].items()) row("tool_usage", tool, u.get<double>());
    return out;
}

}  // namespace repairenv
