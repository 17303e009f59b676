// include/xmodal/retrieval.hpp
#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/matrix.hpp"

namespace xmodal {

enum class Direction { image_query_text_db, text_query_image_db };
enum class SimilarityMetric { cosine, dot, neg_euclidean };

inline std::string direction_name(Direction d) {
    return d == Direction::image_query_text_db ? "image_query_text_db" : "text_query_image_db";
}

inline std::string metric_name(SimilarityMetric m) {
    switch (m) {
        case SimilarityMetric::cosine: return "cosine";
        case SimilarityMetric::dot: return "dot";
        case SimilarityMetric::neg_euclidean: return "neg_euclidean";
    }
    throw ConfigError("unknown metric");
}

inline SimilarityMetric metric_from_name(const std::string& s) {
    if (s == "cosine") return SimilarityMetric::cosine;
    if (s == "dot") return SimilarityMetric::dot;
    if (s == "neg_euclidean") return SimilarityMetric::neg_euclidean;
    throw ConfigError("unknown metric: " + s);
}

// Per query: database indices sorted by descending similarity, ties broken
// by ascending index. A zero vector under cosine falls back to the dot
// product for that pair (and warns once per call).
inline std::vector<std::vector<std::size_t>> rank(const Matrix& query_reps, const Matrix& db_reps,
                                                  SimilarityMetric metric) {
    if (query_reps.rows != db_reps.rows) throw ConfigError("rank: representation dims differ");
    if (db_reps.cols == 0) throw ValidationError("rank: empty database");
    std::vector<double> db_norms(db_reps.cols);
    for (std::size_t j = 0; j < db_reps.cols; ++j) db_norms[j] = std::sqrt(dot_cols(db_reps, j, db_reps, j));

    bool warned = false;
    std::vector<std::vector<std::size_t>> ranked(query_reps.cols);
    std::vector<double> score(db_reps.cols);
    for (std::size_t q = 0; q < query_reps.cols; ++q) {
        const double qn = std::sqrt(dot_cols(query_reps, q, query_reps, q));
        for (std::size_t j = 0; j < db_reps.cols; ++j) {
            switch (metric) {
                case SimilarityMetric::cosine: {
                    const double denom = qn * db_norms[j];
                    if (denom == 0.0) {
                        if (!warned) {
                            std::cerr << "warning: zero-norm representation under cosine; "
                                         "falling back to dot product\n";
                            warned = true;
                        }
                        score[j] = dot_cols(query_reps, q, db_reps, j);
                    } else {
                        score[j] = dot_cols(query_reps, q, db_reps, j) / denom;
                    }
                    break;
                }
                case SimilarityMetric::dot:
                    score[j] = dot_cols(query_reps, q, db_reps, j);
                    break;
                case SimilarityMetric::neg_euclidean:
                    score[j] = -sq_dist_cols(query_reps, q, db_reps, j);
                    break;
            }
        }
        ranked[q].resize(db_reps.cols);
        std::iota(ranked[q].begin(), ranked[q].end(), 0);
        std::sort(ranked[q].begin(), ranked[q].end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return a < b;
        });
    }
    return ranked;
}

// S-L: same class. M-L: at least one shared concept (<L_q, L_d> >= 1).
inline bool relevance(std::span<const double> query_label, std::span<const double> db_label,
                      LabelMode mode) {
    if (query_label.size() != db_label.size()) throw ConfigError("relevance: label length mismatch");
    double inner = 0.0;
    for (std::size_t i = 0; i < query_label.size(); ++i) inner += query_label[i] * db_label[i];
    if (mode == LabelMode::multi_label) return inner >= 1.0;
    return inner >= 1.0;  // one-hot labels: equal class iff the inner product is 1
}

// AP(q) = sum_r P_q(r) * delta(r) / sum_r delta(r), both sums over the top R.
// A query with no relevant item in the top R scores 0.
inline double average_precision(std::span<const char> ranked_relevance, std::size_t cutoff) {
    if (ranked_relevance.empty()) throw ValidationError("average_precision: empty ranking");
    if (cutoff > ranked_relevance.size()) throw ConfigError("average_precision: cutoff exceeds list length");
    double hits = 0.0;
    double sum = 0.0;
    for (std::size_t r = 0; r < cutoff; ++r) {
        if (ranked_relevance[r]) {
            hits += 1.0;
            sum += hits / static_cast<double>(r + 1);
        }
    }
    return hits > 0.0 ? sum / hits : 0.0;
}

// Ranked lists plus relevance judgments for one retrieval direction.
struct RetrievalRun {
    Direction direction = Direction::image_query_text_db;
    std::vector<std::vector<std::size_t>> ranked;       // per query
    std::vector<std::vector<char>> ranked_relevance;    // per query, in ranked order
};

inline RetrievalRun build_run(Direction direction, const Matrix& query_reps, const Matrix& db_reps,
                              const Matrix& query_labels, const Matrix& db_labels, LabelMode mode,
                              SimilarityMetric metric) {
    if (query_labels.cols != query_reps.cols || db_labels.cols != db_reps.cols)
        throw ConfigError("build_run: label/representation count mismatch");
    RetrievalRun run;
    run.direction = direction;
    run.ranked = rank(query_reps, db_reps, metric);
    run.ranked_relevance.resize(run.ranked.size());
    for (std::size_t q = 0; q < run.ranked.size(); ++q) {
        const auto ql = get_col(query_labels, q);
        run.ranked_relevance[q].resize(run.ranked[q].size());
        for (std::size_t r = 0; r < run.ranked[q].size(); ++r) {
            const auto dl = get_col(db_labels, run.ranked[q][r]);
            run.ranked_relevance[q][r] = relevance(ql, dl, mode) ? 1 : 0;
        }
    }
    return run;
}

struct DirectionScores {
    double map_at_50 = 0.0;
    double map_at_all = 0.0;
};

struct MapReport {
    DirectionScores image_query;  // I-Q: image query against the text database
    DirectionScores text_query;   // T-Q
    double avg_at_50 = 0.0;
    double avg_at_all = 0.0;
};

namespace detail {
inline DirectionScores direction_scores(const RetrievalRun& run, std::size_t cutoff) {
    if (run.ranked.empty()) throw ValidationError("map_report: zero queries");
    DirectionScores s;
    for (const auto& rel : run.ranked_relevance) {
        s.map_at_50 += average_precision(rel, std::min(cutoff, rel.size()));
        s.map_at_all += average_precision(rel, rel.size());
    }
    const double nq = static_cast<double>(run.ranked.size());
    s.map_at_50 /= nq;
    s.map_at_all /= nq;
    return s;
}
}  // namespace detail

inline MapReport map_report(const RetrievalRun& image_query_run, const RetrievalRun& text_query_run,
                            std::size_t cutoff = 50) {
    if (image_query_run.direction != Direction::image_query_text_db ||
        text_query_run.direction != Direction::text_query_image_db)
        throw ConfigError("map_report: runs must cover both directions");
    MapReport report;
    report.image_query = detail::direction_scores(image_query_run, cutoff);
    report.text_query = detail::direction_scores(text_query_run, cutoff);
    report.avg_at_50 = 0.5 * (report.image_query.map_at_50 + report.text_query.map_at_50);
    report.avg_at_all = 0.5 * (report.image_query.map_at_all + report.text_query.map_at_all);
    return report;
}

}  // namespace xmodal
