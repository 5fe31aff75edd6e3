#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hemsim {

// Piecewise-linear 1-D table. Queries slightly outside the grid (within
// `slack` of an endpoint) are clamped; anything further is a domain error.
class Table1d {
public:
    Table1d() = default;
    Table1d(std::vector<double> xs, std::vector<double> ys, std::string name = "table1d")
        : x_(std::move(xs)), y_(std::move(ys)), name_(std::move(name)) {
        if (x_.size() < 2 || x_.size() != y_.size())
            throw std::invalid_argument(name_ + ": need >= 2 matching knots");
        if (!std::is_sorted(x_.begin(), x_.end()))
            throw std::invalid_argument(name_ + ": x values must be ascending");
    }

    double operator()(double x) const {
        const double lo = x_.front(), hi = x_.back();
        const double slack = 1e-9 * std::max(1.0, hi - lo);
        if (x < lo - slack || x > hi + slack)
            throw std::domain_error(name_ + ": query " + std::to_string(x) +
                                    " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        x = std::clamp(x, lo, hi);
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const size_t i = std::min(x_.size() - 1, size_t(it - x_.begin()));
        if (i == 0) return y_.front();
        const double t = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
        return y_[i - 1] + t * (y_[i] - y_[i - 1]);
    }

    double min_x() const { return x_.front(); }
    double max_x() const { return x_.back(); }
    const std::vector<double>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }

private:
    std::vector<double> x_, y_;
    std::string name_;
};

// Bilinear 2-D table on a rectangular grid, values indexed [row][col].
class Table2d {
public:
    Table2d() = default;
    Table2d(std::vector<double> rows, std::vector<double> cols,
            std::vector<std::vector<double>> values, std::string name = "table2d")
        : r_(std::move(rows)), c_(std::move(cols)), v_(std::move(values)), name_(std::move(name)) {
        if (r_.size() < 2 || c_.size() < 2)
            throw std::invalid_argument(name_ + ": need >= 2 knots per axis");
        if (!std::is_sorted(r_.begin(), r_.end()) || !std::is_sorted(c_.begin(), c_.end()))
            throw std::invalid_argument(name_ + ": axes must be ascending");
        if (v_.size() != r_.size())
            throw std::invalid_argument(name_ + ": row count mismatch");
        for (const auto& row : v_)
            if (row.size() != c_.size())
                throw std::invalid_argument(name_ + ": column count mismatch");
    }

    double operator()(double r, double c) const {
        const auto [ri, rt] = locate(r_, r, "row");
        const auto [ci, ct] = locate(c_, c, "col");
        const double v00 = v_[ri][ci], v01 = v_[ri][ci + 1];
        const double v10 = v_[ri + 1][ci], v11 = v_[ri + 1][ci + 1];
        const double a = v00 + ct * (v01 - v00);
        const double b = v10 + ct * (v11 - v10);
        return a + rt * (b - a);
    }

private:
    std::pair<size_t, double> locate(const std::vector<double>& axis, double x, const char* which) const {
        const double lo = axis.front(), hi = axis.back();
        const double slack = 1e-9 * std::max(1.0, hi - lo);
        if (x < lo - slack || x > hi + slack)
            throw std::domain_error(name_ + ": " + which + " query " + std::to_string(x) +
                                    " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        x = std::clamp(x, lo, hi);
        size_t i = size_t(std::upper_bound(axis.begin(), axis.end(), x) - axis.begin());
        i = std::clamp<size_t>(i, 1, axis.size() - 1) - 1;
        return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
    }

    std::vector<double> r_, c_;
    std::vector<std::vector<double>> v_;
    std::string name_;
};

}  // namespace hemsim
