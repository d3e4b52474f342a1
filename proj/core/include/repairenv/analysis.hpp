#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repairenv/episode.hpp"
#include "repairenv/error_category.hpp"

namespace repairenv {

struct CategoryShare {
    std::size_t count = 0;
    double fraction = 0.0;
};

/// Categories that occur at least once, in precedence order. Throws Error(InvalidArgument)
/// for an empty corpus.
std::vector<std::pair<ErrorCategory, CategoryShare>> category_distribution(
    const std::vector<std::string>& corpus, const CategorizeOptions& options = {});

struct TransitionMatrix {
    /// Every tool that was called, known tools in catalogue order, then others by name.
    std::vector<std::string> tools;
    /// P(next | current). Tools never followed by another call have no row.
    std::map<std::string, std::map<std::string, double>> probabilities;
    std::map<std::string, std::map<std::string, std::size_t>> transition_counts;
    std::map<std::string, double> usage;
    std::map<std::string, std::size_t> call_counts;

    [[nodiscard]] bool has_row(const std::string& tool) const { return probabilities.contains(tool); }
    /// Zero for a missing cell of an existing row; nullopt when the row is absent.
    [[nodiscard]] std::optional<double> probability(const std::string& from, const std::string& to) const;

    /// Header "from,<tools...>,usage"; absent rows leave their probability cells empty.
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Counts within each sequence only. Throws Error(NoTransitions) when no tool was called.
TransitionMatrix transition_matrix(const std::vector<std::vector<std::string>>& sequences);
TransitionMatrix transition_matrix(const std::vector<Trajectory>& trajectories);

/// after - before per cell over the union of tools; a cell is empty when either row is absent.
std::string transition_delta_csv(const TransitionMatrix& before, const TransitionMatrix& after);

enum class Outcome { Success, Failure, Total };
std::string_view to_string(Outcome o) noexcept;

struct StatsSummary {
    std::string metric;
    Outcome outcome = Outcome::Total;
    double mean = 0.0;
    double ci95_half_width = 0.0;  // 1.96 * population sd / sqrt(count)
    std::size_t count = 0;
    double min = 0.0;
    double max = 0.0;
};

/// Throws Error(InvalidArgument) for no values.
StatsSummary summarize(const std::vector<double>& values, const std::string& metric, Outcome outcome);

/// Assistant turns per trajectory, per outcome stratum; empty strata are omitted.
std::vector<StatsSummary> turn_stats(const std::vector<Trajectory>& trajectories);
/// Total tokens per trajectory, per outcome stratum.
std::vector<StatsSummary> token_stats(const std::vector<Trajectory>& trajectories,
                                      const Tokenizer& tokenizer = default_tokenizer());

struct TokenBreakdown {
    Outcome outcome = Outcome::Total;
    std::map<std::string, std::size_t> counts;
    std::map<std::string, double> fractions;            // thinking included
    std::map<std::string, double> fractions_excluding;  // thinking dropped, renormalized
    std::map<std::string, double> display;              // shares under 1% folded into "other"
    std::map<std::string, double> display_excluding;
};

/// Categories below `threshold` are summed into "other".
std::map<std::string, double> fold_minor_categories(const std::map<std::string, double>& fractions,
                                                    double threshold = 0.01);

std::vector<TokenBreakdown> token_breakdown(const std::vector<Trajectory>& trajectories,
                                            const Tokenizer& tokenizer = default_tokenizer());

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

struct BuildTimeStats {
    StatsSummary summary;
    /// Log-spaced bins from the decade below the smallest value to the decade above the
    /// largest. Lower edges inclusive, upper edges exclusive except for the last bin.
    std::vector<HistogramBin> histogram;
    std::size_t nonpositive = 0;  // durations <= 0 cannot sit on a log axis
};

BuildTimeStats build_time_stats(const std::vector<double>& durations_s, std::size_t bins_per_decade = 1,
                                Outcome outcome = Outcome::Total);
/// Every build duration recorded in the trajectories, per outcome stratum.
std::vector<BuildTimeStats> build_time_stats(const std::vector<Trajectory>& trajectories,
                                             std::size_t bins_per_decade = 1);

/// The build error an episode was started on, read back from its system prompt.
std::optional<std::string> prompt_error_text(const Trajectory& trajectory);

/// Everything above for one set of trajectories plus the error category distribution of
/// the first error each trajectory was given.
nlohmann::ordered_json analysis_report(const std::vector<Trajectory>& trajectories,
                                       const std::vector<std::string>& error_corpus,
                                       const Tokenizer& tokenizer = default_tokenizer());

/// "series,category,value" rows for plotting.
std::string plot_data_csv(const nlohmann::ordered_json& report);

}  // namespace repairenv
