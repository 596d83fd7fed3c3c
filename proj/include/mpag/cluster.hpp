#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "mpag/errors.hpp"
#include "mpag/rng.hpp"
#include "mpag/text.hpp"

namespace mpag {

/// L2-normalized sparse bag-of-words point.
struct SparsePoint {
    std::vector<std::pair<TokenId, double>> entries; // sorted by id
    double norm_sq = 0.0;                            // 1 for non-empty, 0 for empty

    static SparsePoint from_counts(const std::map<TokenId, std::size_t>& counts) {
        SparsePoint p;
        double sq = 0.0;
        for (const auto& [id, c] : counts) sq += static_cast<double>(c) * static_cast<double>(c);
        double norm = std::sqrt(sq);
        for (const auto& [id, c] : counts)
            p.entries.emplace_back(id, static_cast<double>(c) / norm);
        p.norm_sq = p.entries.empty() ? 0.0 : 1.0;
        return p;
    }
};

struct KmeansResult {
    std::vector<std::size_t> assignment;   // cluster index per point
    std::vector<double> objective_trace;   // SSE after each Lloyd iteration
    std::vector<std::vector<double>> centroids; // final centroids, dense
    std::size_t iterations = 0;
};

namespace detail {

inline double dot_sparse_dense(const SparsePoint& p, const std::vector<double>& centroid) {
    double d = 0.0;
    for (const auto& [id, v] : p.entries) {
        auto it = id < centroid.size() ? centroid.begin() + id : centroid.end();
        if (it != centroid.end()) d += v * *it;
    }
    return d;
}

inline double dist_sq(const SparsePoint& p, const std::vector<double>& centroid,
                      double centroid_norm_sq) {
    return std::max(0.0, p.norm_sq - 2.0 * dot_sparse_dense(p, centroid) + centroid_norm_sq);
}

} // namespace detail

/// Lloyd's algorithm with k-means++ seeding on L2-normalized BOW vectors.
/// Distance ties and k-means++ degeneracies resolve toward lower indices, so
/// the result is a deterministic function of (points, k, seed).
inline KmeansResult kmeans(const std::vector<SparsePoint>& points, std::size_t k,
                           std::size_t max_iters, std::uint64_t seed) {
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    KmeansResult res;
    std::size_t n = points.size();
    res.assignment.assign(n, 0);
    if (n == 0) return res;

    std::size_t dim = 0;
    for (const auto& p : points)
        for (const auto& [id, v] : p.entries) dim = std::max(dim, static_cast<std::size_t>(id) + 1);

    auto densify = [dim](const SparsePoint& p) {
        std::vector<double> c(dim, 0.0);
        for (const auto& [id, v] : p.entries) c[id] = v;
        return c;
    };

    if (k >= n) {
        // Each point stands alone; surplus clusters stay empty.
        res.centroids.assign(k, std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            res.assignment[i] = i;
            res.centroids[i] = densify(points[i]);
        }
        return res;
    }

    Rng rng(seed);
    // k-means++ seeding.
    std::vector<std::vector<double>> centroids;
    std::vector<double> centroid_norm_sq;
    std::size_t first = rng.uniform_index(n);
    centroids.push_back(densify(points[first]));
    centroid_norm_sq.push_back(points[first].norm_sq);

    std::vector<double> best_d(n, std::numeric_limits<double>::infinity());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = detail::dist_sq(points[i], centroids.back(), centroid_norm_sq.back());
            best_d[i] = std::min(best_d[i], d);
            total += best_d[i];
        }
        std::size_t chosen;
        if (total <= 0.0) {
            chosen = rng.uniform_index(n); // all points coincide with centroids
        } else {
            double r = rng.uniform() * total;
            chosen = n - 1;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += best_d[i];
                if (r < acc) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.push_back(densify(points[chosen]));
        centroid_norm_sq.push_back(points[chosen].norm_sq);
    }

    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // Assignment step; ties go to the lowest cluster index.
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double d = detail::dist_sq(points[i], centroids[c], centroid_norm_sq[c]);
                if (d < best) { // ties keep the lowest cluster index
                    best = d;
                    arg = c;
                }
            }
            if (assignment[i] != arg) {
                assignment[i] = arg;
                changed = true;
            }
        }

        // Repair empty clusters with the point farthest from its centroid.
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t a : assignment) ++sizes[a];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            double worst = -1.0;
            std::size_t worst_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[assignment[i]] <= 1) continue;
                double d = detail::dist_sq(points[i], centroids[assignment[i]],
                                           centroid_norm_sq[assignment[i]]);
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            if (worst < 0.0) break;
            --sizes[assignment[worst_i]];
            assignment[worst_i] = c;
            sizes[c] = 1;
            changed = true;
        }

        // Update step: centroid = mean of assigned points.
        for (std::size_t c = 0; c < k; ++c) {
            std::fill(centroids[c].begin(), centroids[c].end(), 0.0);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& [id, v] : points[i].entries) centroids[assignment[i]][id] += v;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) continue;
            double inv = 1.0 / static_cast<double>(sizes[c]);
            double nsq = 0.0;
            for (double& v : centroids[c]) {
                v *= inv;
                nsq += v * v;
            }
            centroid_norm_sq[c] = nsq;
        }

        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sse += detail::dist_sq(points[i], centroids[assignment[i]],
                                   centroid_norm_sq[assignment[i]]);
        res.objective_trace.push_back(sse);
        res.iterations = iter + 1;
        if (!changed) break;
    }
    res.assignment = std::move(assignment);
    res.centroids = std::move(centroids);
    return res;
}

/// K fixed-capacity clusters of review indices. Padded slots are flagged
/// invalid and hold no review.
struct ReviewClusters {
    std::size_t k = 0;
    std::size_t n = 0;
    std::vector<std::vector<long>> member_index; // k rows of n entries; -1 for padding
    std::vector<std::vector<std::uint8_t>> valid;

    std::size_t real_count() const {
        std::size_t c = 0;
        for (const auto& row : valid)
            for (auto v : row) c += v;
        return c;
    }
};

/// Keeps the n highest-scoring reviews per cluster (ties to lower original
/// index, presented in original order) and pads the rest.
inline ReviewClusters form_clusters(const std::vector<std::size_t>& assignment,
                                    std::size_t num_reviews, std::size_t k, std::size_t n,
                                    const std::vector<double>& review_scores) {
    if (n < 1) throw ConfigError("form_clusters: cluster capacity must be >= 1");
    if (assignment.size() != num_reviews)
        throw DataError("form_clusters: assignment length does not match review count");
    if (!review_scores.empty() && review_scores.size() != num_reviews)
        throw DataError("form_clusters: review_scores length does not match review count");

    ReviewClusters rc;
    rc.k = k;
    rc.n = n;
    rc.member_index.assign(k, std::vector<long>(n, -1));
    rc.valid.assign(k, std::vector<std::uint8_t>(n, 0));

    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < num_reviews; ++i)
            if (assignment[i] == c) members.push_back(i);
        if (members.size() > n) {
            std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                double sa = review_scores.empty() ? 1.0 : review_scores[a];
                double sb = review_scores.empty() ? 1.0 : review_scores[b];
                if (sa != sb) return sa > sb;
                return a < b;
            });
            members.resize(n);
            std::sort(members.begin(), members.end());
        }
        for (std::size_t j = 0; j < members.size(); ++j) {
            rc.member_index[c][j] = static_cast<long>(members[j]);
            rc.valid[c][j] = 1;
        }
    }
    return rc;
}

} // namespace mpag
