#include "skel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "skel/error.hpp"
#include "skel/io.hpp"

namespace skel {

namespace {

Raster gaussian_smooth(const Raster& r, double sigma) {
    int radius = 3;
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    Raster tmp(r.w, r.h), out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * r.at(std::clamp(x + i, 0, r.w - 1), y);
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, r.h - 1));
            out.at(x, y) = acc;
        }
    }
    return out;
}

}  // namespace

Raster nms_thin(const Raster& response) {
    Raster smooth = gaussian_smooth(response, 1.0);
    auto S = [&](int x, int y) {
        return smooth.at(std::clamp(x, 0, smooth.w - 1), std::clamp(y, 0, smooth.h - 1));
    };
    Raster out(response.w, response.h);
    for (int y = 0; y < response.h; ++y) {
        for (int x = 0; x < response.w; ++x) {
            double v = response.at(x, y);
            if (v <= 0.0) continue;
            // Sobel on the smoothed copy
            double gx = (S(x + 1, y - 1) + 2 * S(x + 1, y) + S(x + 1, y + 1)) -
                        (S(x - 1, y - 1) + 2 * S(x - 1, y) + S(x - 1, y + 1));
            double gy = (S(x - 1, y + 1) + 2 * S(x, y + 1) + S(x + 1, y + 1)) -
                        (S(x - 1, y - 1) + 2 * S(x, y - 1) + S(x + 1, y - 1));
            double n = std::hypot(gx, gy);
            double dx = 1.0, dy = 0.0;
            if (n > 0) {
                dx = gx / n;
                dy = gy / n;
            }
            double a = sample_bilinear(response, x + dx, y + dy);
            double b = sample_bilinear(response, x - dx, y - dy);
            if (v >= a && v >= b) out.at(x, y) = v;
        }
    }
    return out;
}

MatchCounts match_maps(const Raster& pred, const Mask& gt, double tol) {
    if (tol <= 0) throw ArgError("match_maps: tolerance must be positive");
    if (pred.w != gt.w || pred.h != gt.h)
        throw DimError("match_maps: prediction and ground truth sizes differ");

    struct Pt {
        double v;
        int x, y;
    };
    std::vector<Pt> preds;
    for (int y = 0; y < pred.h; ++y) {
        for (int x = 0; x < pred.w; ++x) {
            if (pred.at(x, y) > 0.0) preds.push_back({pred.at(x, y), x, y});
        }
    }
    std::stable_sort(preds.begin(), preds.end(), [](const Pt& a, const Pt& b) { return a.v > b.v; });

    std::vector<std::pair<int, int>> gts;
    for (int y = 0; y < gt.h; ++y) {
        for (int x = 0; x < gt.w; ++x) {
            if (gt.at(x, y)) gts.emplace_back(x, y);
        }
    }

    // bucket ground truth by cells of the tolerance size
    int cell = std::max(1, static_cast<int>(std::ceil(tol)));
    int cw = pred.w / cell + 1, ch = pred.h / cell + 1;
    std::vector<std::vector<int>> buckets(static_cast<size_t>(cw) * ch);
    for (size_t i = 0; i < gts.size(); ++i) {
        buckets[static_cast<size_t>(gts[i].second / cell) * cw + gts[i].first / cell].push_back(
            static_cast<int>(i));
    }
    std::vector<char> taken(gts.size(), 0);

    MatchCounts c;
    double tol2 = tol * tol;
    for (const Pt& p : preds) {
        int bx = p.x / cell, by = p.y / cell;
        int best = -1;
        double best_d = tol2 + 1;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int cx = bx + dx, cy = by + dy;
                if (cx < 0 || cy < 0 || cx >= cw || cy >= ch) continue;
                for (int gi : buckets[static_cast<size_t>(cy) * cw + cx]) {
                    if (taken[gi]) continue;
                    double ddx = gts[gi].first - p.x, ddy = gts[gi].second - p.y;
                    double d = ddx * ddx + ddy * ddy;
                    if (d <= tol2 && d < best_d) {
                        best_d = d;
                        best = gi;
                    }
                }
            }
        }
        if (best >= 0) {
            taken[best] = 1;
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    c.fn = static_cast<int64_t>(gts.size()) - c.tp;
    return c;
}

std::vector<double> uniform_thresholds(int count) {
    if (count < 1) throw ArgError("thresholds: count must be >= 1");
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) t[i] = static_cast<double>(i + 1) / (count + 1);
    return t;
}

double f_measure(double precision, double recall) {
    if (precision + recall <= 0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double match_tolerance(int w, int h, const EvalOptions& opt) {
    if (opt.tol_abs > 0) return opt.tol_abs;
    return opt.tol_frac * std::sqrt(static_cast<double>(w) * w + static_cast<double>(h) * h);
}

EvalReport pr_curve(const std::vector<Raster>& thinned, const std::vector<Mask>& gts,
                    const std::vector<double>& thresholds, const EvalOptions& opt) {
    if (thinned.empty() || thinned.size() != gts.size())
        throw ArgError("pr_curve: need equally many predictions and ground truths");
    for (double t : thresholds) {
        if (t <= 0 || t >= 1) throw ArgError("pr_curve: thresholds must lie in (0,1)");
    }

    EvalReport rep;
    rep.thresholds = thresholds;
    for (double t : thresholds) {
        MatchCounts total;
        for (size_t i = 0; i < thinned.size(); ++i) {
            Raster kept(thinned[i].w, thinned[i].h);
            for (size_t j = 0; j < kept.v.size(); ++j) {
                if (thinned[i].v[j] >= t) kept.v[j] = thinned[i].v[j];
            }
            MatchCounts c = match_maps(kept, gts[i], match_tolerance(kept.w, kept.h, opt));
            total.tp += c.tp;
            total.fp += c.fp;
            total.fn += c.fn;
        }
        bool degen = total.tp + total.fp == 0;
        double p = degen ? 0.0 : static_cast<double>(total.tp) / (total.tp + total.fp);
        double r = total.tp + total.fn == 0 ? 0.0
                                            : static_cast<double>(total.tp) / (total.tp + total.fn);
        rep.precision.push_back(p);
        rep.recall.push_back(r);
        rep.f.push_back(degen ? 0.0 : f_measure(p, r));
        rep.degenerate.push_back(degen ? 1 : 0);
    }
    size_t best = 0;
    for (size_t i = 1; i < rep.f.size(); ++i) {
        if (rep.f[i] > rep.f[best]) best = i;
    }
    rep.ods_threshold = rep.thresholds[best];
    rep.ods_f = rep.f[best];
    return rep;
}

void write_report(const std::string& path, const EvalReport& rep) {
    std::ofstream os(path);
    if (!os) throw FormatError("report: cannot open '" + path + "' for writing");
    os << "threshold\tprecision\trecall\tf\tdegenerate\n";
    char buf[160];
    for (size_t i = 0; i < rep.thresholds.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f\t%.6f\t%.6f\t%.6f\t%d\n", rep.thresholds[i],
                      rep.precision[i], rep.recall[i], rep.f[i], rep.degenerate[i] ? 1 : 0);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "ods_threshold\t%.6f\n", rep.ods_threshold);
    os << buf;
    std::snprintf(buf, sizeof buf, "ods_f\t%.6f\n", rep.ods_f);
    os << buf;
}

Raster render_pr_curve(const EvalReport& rep, int size) {
    Raster img(size, size, 1.0);
    for (int i = 0; i < size; ++i) {  // frame
        img.at(i, 0) = img.at(i, size - 1) = 0.5;
        img.at(0, i) = img.at(size - 1, i) = 0.5;
    }
    auto dot = [&](double rx, double py, double shade) {
        int x = static_cast<int>(std::lround(rx * (size - 1)));
        int y = static_cast<int>(std::lround((1.0 - py) * (size - 1)));
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                int xx = std::clamp(x + dx, 0, size - 1);
                int yy = std::clamp(y + dy, 0, size - 1);
                img.at(xx, yy) = shade;
            }
        }
    };
    for (size_t i = 0; i < rep.thresholds.size(); ++i) {
        if (!rep.degenerate[i]) dot(rep.recall[i], rep.precision[i], 0.0);
    }
    return img;
}

}  // namespace skel
