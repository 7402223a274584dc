#include "esplit/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace esplit {

ToleranceLadder::ToleranceLadder(double eps1, double ratio) : eps1_(eps1), ratio_(ratio) {
    if (!(eps1 > 0.0)) throw std::invalid_argument("ToleranceLadder: eps1 must be positive");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("ToleranceLadder: ratio must lie in (0, 1)");
}

double ToleranceLadder::eps(int level) const {
    return eps1_ * std::pow(ratio_, static_cast<double>(level - 1));
}

int ToleranceLadder::level_for_scale(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("ToleranceLadder: non-positive scale");
    return 1 - static_cast<int>(std::lround(std::log(factor) / std::log(1.0 / ratio_)));
}

bool Box::intersects(const Box& other) const {
    for (std::size_t i = 0; i < dim(); ++i)
        if (upper[i] < other.lower[i] || other.upper[i] < lower[i]) return false;
    return true;
}

bool Box::contains(const Box& other) const {
    for (std::size_t i = 0; i < dim(); ++i)
        if (other.lower[i] < lower[i] || other.upper[i] > upper[i]) return false;
    return true;
}

bool Box::contains(const Point& p) const {
    for (std::size_t i = 0; i < dim(); ++i)
        if (p[i] < lower[i] || p[i] > upper[i]) return false;
    return true;
}

Point Cell::x_start() const {
    Point p;
    for (const auto& c : coords) p.push_back(c.x_start);
    return p;
}

Point Cell::x_end() const {
    Point p;
    for (const auto& c : coords) p.push_back(c.x_end);
    return p;
}

Box Cell::box() const {
    Box b;
    for (const auto& c : coords) {
        b.lower.push_back(c.lower);
        b.upper.push_back(c.upper);
    }
    return b;
}

Point Cell::midpoint() const {
    Point p;
    for (const auto& c : coords) p.push_back(0.5 * (c.lower + c.upper));
    return p;
}

double Cell::diameter() const {
    double d = 0.0;
    for (const auto& c : coords) d = std::max(d, c.upper - c.lower);
    return d;
}

bool operator==(const Cell& a, const Cell& b) {
    if (a.t_start != b.t_start || a.t_end != b.t_end || a.level != b.level ||
        a.coords.size() != b.coords.size())
        return false;
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        const auto& p = a.coords[i];
        const auto& q = b.coords[i];
        if (p.x_start != q.x_start || p.x_end != q.x_end || p.lower != q.lower ||
            p.inner_lower != q.inner_lower || p.inner_upper != q.inner_upper || p.upper != q.upper)
            return false;
    }
    return true;
}

Skeleton::Skeleton(std::vector<Cell> cells) : cells_(std::move(cells)) {
    for (std::size_t k = 1; k < cells_.size(); ++k)
        if (cells_[k].t_start != cells_[k - 1].t_end)
            throw std::invalid_argument("Skeleton: cells are not time-contiguous");
}

double Skeleton::span_start() const {
    if (empty()) throw std::out_of_range("Skeleton: empty skeleton has no span");
    return cells_.front().t_start;
}

double Skeleton::span_end() const {
    if (empty()) throw std::out_of_range("Skeleton: empty skeleton has no span");
    return cells_.back().t_end;
}

Skeleton Skeleton::sub(std::size_t first, std::size_t last) const {
    Skeleton out;
    if (first >= last) return out;
    if (last > cells_.size()) throw std::out_of_range("Skeleton::sub: range past end");
    out.cells_.assign(cells_.begin() + static_cast<std::ptrdiff_t>(first),
                      cells_.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

Skeleton Skeleton::splice(std::size_t first, std::size_t last, const Skeleton& replacement) const {
    if (first > last || last > cells_.size())
        throw std::out_of_range("Skeleton::splice: bad range");
    Skeleton out;
    out.cells_.reserve(cells_.size() - (last - first) + replacement.size());
    out.cells_.insert(out.cells_.end(), cells_.begin(),
                      cells_.begin() + static_cast<std::ptrdiff_t>(first));
    out.cells_.insert(out.cells_.end(), replacement.cells_.begin(), replacement.cells_.end());
    out.cells_.insert(out.cells_.end(), cells_.begin() + static_cast<std::ptrdiff_t>(last),
                      cells_.end());
    return out;
}

bool Skeleton::well_formed(double tol) const {
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        const Cell& c = cells_[k];
        if (!(c.t_start < c.t_end)) return false;
        for (const auto& t : c.coords) {
            if (t.lower > std::min(t.x_start, t.x_end) || t.upper < std::max(t.x_start, t.x_end))
                return false;
            if (t.lower > t.inner_lower || t.inner_upper > t.upper) return false;
        }
        if (k == 0) continue;
        const Cell& p = cells_[k - 1];
        if (std::abs(p.t_end - c.t_start) > tol) return false;
        if (p.dim() != c.dim()) return false;
        for (std::size_t i = 0; i < c.dim(); ++i)
            if (std::abs(p.coords[i].x_end - c.coords[i].x_start) > tol) return false;
    }
    return true;
}

bool operator==(const Skeleton& a, const Skeleton& b) { return a.cells_ == b.cells_; }

bool compatible(const Skeleton& s1, const Skeleton& s2) {
    if (s1.empty() || s2.empty()) return true;
    const double gap = std::abs(s1.span_end() - s2.span_start());
    const double scale = std::max({1.0, std::abs(s1.span_end()), std::abs(s2.span_start())});
    if (gap > 1e-12 * scale)
        throw std::invalid_argument("compatible: skeleton time spans are not adjacent");
    return s1.back().box().intersects(s2.front().box());
}

Skeleton concat(const Skeleton& s1, const Skeleton& s2) {
    if (s1.empty()) return s2;
    if (s2.empty()) return s1;
    if (!compatible(s1, s2)) throw IncompatibleSkeletons("concat: constraining boxes are disjoint");
    std::vector<Cell> cells;
    cells.reserve(s1.size() + s2.size());
    cells.insert(cells.end(), s1.cells().begin(), s1.cells().end());
    cells.insert(cells.end(), s2.cells().begin(), s2.cells().end());
    cells[s1.size()].t_start = s1.span_end();
    return Skeleton(std::move(cells));
}

std::size_t cell_index_at(const Skeleton& s, double u) {
    if (s.empty()) throw std::out_of_range("evaluate: empty skeleton");
    if (u < s.span_start() || u > s.span_end())
        throw std::out_of_range("evaluate: time outside skeleton span");
    const auto& cells = s.cells();
    // First cell whose end exceeds u; u equal to the span end maps to the last cell.
    auto it = std::upper_bound(cells.begin(), cells.end(), u,
                               [](double v, const Cell& c) { return v < c.t_end; });
    if (it == cells.end()) return cells.size() - 1;
    return static_cast<std::size_t>(it - cells.begin());
}

Point evaluate(const Skeleton& s, double u) { return s[cell_index_at(s, u)].midpoint(); }

void write_skeleton(std::ostream& os, const Skeleton& s) {
    const std::size_t dim = s.empty() ? 0 : s.front().dim();
    os << "skeleton " << dim << ' ' << s.size() << '\n';
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& c : s.cells()) {
        os << c.t_start << ' ' << c.t_end << ' ' << c.level;
        for (const auto& t : c.coords)
            os << ' ' << t.x_start << ' ' << t.x_end << ' ' << t.lower << ' ' << t.inner_lower
               << ' ' << t.inner_upper << ' ' << t.upper;
        os << '\n';
    }
    os.precision(old);
}

Skeleton read_skeleton(std::istream& is) {
    std::string tag;
    std::size_t dim = 0;
    std::size_t count = 0;
    if (!(is >> tag >> dim >> count) || tag != "skeleton")
        throw std::invalid_argument("read_skeleton: missing header");
    std::vector<Cell> cells(count);
    for (auto& c : cells) {
        if (!(is >> c.t_start >> c.t_end >> c.level))
            throw std::invalid_argument("read_skeleton: truncated record");
        c.coords.resize(dim);
        for (auto& t : c.coords)
            if (!(is >> t.x_start >> t.x_end >> t.lower >> t.inner_lower >> t.inner_upper >> t.upper))
                throw std::invalid_argument("read_skeleton: truncated record");
    }
    return Skeleton(std::move(cells));
}

std::string to_text(const Skeleton& s) {
    std::ostringstream os;
    write_skeleton(os, s);
    return os.str();
}

Skeleton from_text(const std::string& text) {
    std::istringstream is(text);
    return read_skeleton(is);
}

}  // namespace esplit
