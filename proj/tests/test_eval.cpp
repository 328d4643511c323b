#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "skel/error.hpp"
#include "skel/eval.hpp"
#include "skel/rng.hpp"

using namespace skel;

TEST_CASE("nms: a soft ridge keeps only its crest row") {
    Raster r(20, 20);
    for (int x = 0; x < 20; ++x) {
        r.at(x, 9) = 0.1;
        r.at(x, 10) = 1.0;
        r.at(x, 11) = 0.1;
    }
    Raster t = nms_thin(r);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            if (y == 10) {
                CHECK(t.at(x, y) == 1.0);
            } else {
                CHECK(t.at(x, y) == 0.0);
            }
        }
}

TEST_CASE("nms: zero map stays zero, thin curves stay intact") {
    Raster z(16, 16);
    Raster tz = nms_thin(z);
    for (double v : tz.v) CHECK(v == 0.0);

    // 1-pixel diagonal curve: unchanged up to endpoints
    Raster d(24, 24);
    for (int i = 4; i < 20; ++i) d.at(i, i) = 1.0;
    Raster td = nms_thin(d);
    int kept = 0;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            if (x == y && x >= 4 && x < 20) {
                kept += td.at(x, y) == 1.0 ? 1 : 0;
            } else {
                CHECK(td.at(x, y) == 0.0);  // never invents pixels
            }
        }
    CHECK(kept >= 14);  // 16 pixels, endpoints may go
}

TEST_CASE("match_maps: exact match, empty prediction, one-to-one assignment") {
    Mask gt(16, 16);
    Raster pred(16, 16);
    for (int i = 3; i < 13; ++i) {
        gt.at(i, 8) = 1;
        pred.at(i, 8) = 0.9;
    }
    MatchCounts c = match_maps(pred, gt, 2.0);
    CHECK(c.tp == 10);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);

    Raster empty(16, 16);
    c = match_maps(empty, gt, 2.0);
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.fn == 10);

    // two predictions near a single ground-truth pixel: one tp, one fp
    Mask g1(8, 8);
    g1.at(4, 4) = 1;
    Raster p2(8, 8);
    p2.at(4, 3) = 0.8;
    p2.at(4, 5) = 0.7;
    c = match_maps(p2, g1, 2.0);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 0);

    CHECK_THROWS_AS(match_maps(p2, g1, 0.0), ArgError);
}

TEST_CASE("match_maps: count bookkeeping always balances") {
    Rng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        int w = rng.uniform_int(8, 24), h = rng.uniform_int(8, 24);
        Mask gt(w, h);
        Raster pred(w, h);
        int gt_n = 0, pred_n = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (rng.uniform(0, 1) < 0.1) {
                    gt.at(x, y) = 1;
                    ++gt_n;
                }
                if (rng.uniform(0, 1) < 0.1) {
                    pred.at(x, y) = rng.uniform(0.1, 1.0);
                    ++pred_n;
                }
            }
        MatchCounts c = match_maps(pred, gt, rng.uniform(1.0, 4.0));
        CHECK(c.tp + c.fn == gt_n);
        CHECK(c.tp + c.fp == pred_n);
    }
}

TEST_CASE("greedy matching is near-optimal on small instances") {
    Rng rng(123);
    int agree = 0;
    const int trials = 1000;
    int logged = 0;
    for (int trial = 0; trial < trials; ++trial) {
        int np = rng.uniform_int(0, 20), ng = rng.uniform_int(0, 20);
        double tol = rng.uniform(1.0, 3.5);
        Mask gt(24, 24);
        Raster pred(24, 24);
        std::vector<std::pair<double, double>> pp, gg;
        for (int i = 0; i < ng; ++i) {
            int x = rng.uniform_int(0, 23), y = rng.uniform_int(0, 23);
            if (!gt.at(x, y)) {
                gt.at(x, y) = 1;
                gg.emplace_back(x, y);
            }
        }
        for (int i = 0; i < np; ++i) {
            int x = rng.uniform_int(0, 23), y = rng.uniform_int(0, 23);
            if (pred.at(x, y) == 0.0) {
                pred.at(x, y) = rng.uniform(0.05, 1.0);
                pp.emplace_back(x, y);
            }
        }
        int greedy = static_cast<int>(match_maps(pred, gt, tol).tp);
        int optimal = oracle::max_bipartite_tp(pp, gg, tol);
        CHECK(greedy <= optimal);
        if (greedy == optimal) {
            ++agree;
        } else if (logged < 5) {
            MESSAGE("greedy " << greedy << " vs optimal " << optimal << " at trial " << trial);
            ++logged;
        }
    }
    CHECK(agree >= trials * 95 / 100);
}

TEST_CASE("pr curve: perfect predictor, formula spot check, ods bookkeeping") {
    Mask gt(20, 20);
    Raster resp(20, 20);
    for (int i = 2; i < 18; ++i) {
        gt.at(i, 10) = 1;
        resp.at(i, 10) = 1.0;
    }
    EvalOptions opt;
    auto thresholds = uniform_thresholds(99);
    CHECK(thresholds.size() == 99);
    CHECK(thresholds.front() == doctest::Approx(0.01));
    CHECK(thresholds.back() == doctest::Approx(0.99));

    EvalReport rep = pr_curve({nms_thin(resp)}, {gt}, thresholds, opt);
    CHECK(rep.ods_f == 1.0);
    for (size_t i = 0; i < rep.f.size(); ++i) {
        CHECK(rep.degenerate[i] == 0);
        CHECK(rep.f[i] == 1.0);
    }

    // empty predictions: every threshold is degenerate, ods stays 0
    Raster empty(20, 20);
    EvalReport rep0 = pr_curve({empty}, {gt}, thresholds, opt);
    CHECK(rep0.ods_f == 0.0);
    for (size_t i = 0; i < rep0.f.size(); ++i) CHECK(rep0.degenerate[i] == 1);

    CHECK(f_measure(0.8, 0.6) == doctest::Approx(0.685714).epsilon(1e-6));
    CHECK(f_measure(0.6, 0.8) == f_measure(0.8, 0.6));  // symmetric
    CHECK(f_measure(0.8, 0.6) <= 0.8);                  // bounded by max(P,R)
    CHECK(f_measure(0.0, 0.0) == 0.0);

    // ods is the max of the f list
    double fmax = *std::max_element(rep.f.begin(), rep.f.end());
    CHECK(rep.ods_f == fmax);
}

TEST_CASE("raising the threshold never enlarges the prediction set") {
    Rng rng(9);
    Raster resp(32, 32);
    for (auto& v : resp.v) v = rng.uniform(0, 1) < 0.2 ? rng.uniform(0.01, 1.0) : 0.0;
    int prev = 1 << 30;
    for (double t : uniform_thresholds(19)) {
        int count = 0;
        for (double v : resp.v) count += v >= t ? 1 : 0;
        CHECK(count <= prev);
        prev = count;
    }
}

TEST_CASE("report writer: one row per threshold plus the ods summary") {
    EvalReport rep;
    rep.thresholds = {0.25, 0.5, 0.75};
    rep.precision = {1.0, 0.8, 0.6};
    rep.recall = {0.5, 0.6, 0.7};
    rep.f = {f_measure(1.0, 0.5), f_measure(0.8, 0.6), f_measure(0.6, 0.7)};
    rep.degenerate = {0, 0, 0};
    rep.ods_threshold = 0.5;
    rep.ods_f = rep.f[1];
    auto path = std::filesystem::temp_directory_path() / "skel_report_test.tsv";
    write_report(path.string(), rep);
    std::ifstream is(path);
    std::string line;
    int data_rows = 0, summary = 0;
    std::getline(is, line);
    CHECK(line == "threshold\tprecision\trecall\tf\tdegenerate");
    while (std::getline(is, line)) {
        if (line.rfind("ods_", 0) == 0) {
            ++summary;
        } else if (!line.empty()) {
            ++data_rows;
        }
    }
    CHECK(data_rows == 3);
    CHECK(summary == 2);
    std::filesystem::remove(path);

    Raster img = render_pr_curve(rep);
    CHECK(img.w == 256);
    CHECK(img.h == 256);
}
