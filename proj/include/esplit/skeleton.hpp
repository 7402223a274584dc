#pragma once

// Finite representation of epsilon-strong paths.
//
// A Cell covers [t_start, t_end] and records, per coordinate, the exact
// process values at both ends and the extrema envelopes
//   lower <= inf X <= inner_lower,   inner_upper <= sup X <= upper.
// The constraining box of the cell is the product of [lower, upper].
// A Skeleton is a time-contiguous sequence of cells.

#include <boost/container/small_vector.hpp>

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace esplit {

using Point = boost::container::small_vector<double, 2>;

/// eps(l) = eps1 * ratio^(l-1). Indices below 1 give coarser tolerances.
class ToleranceLadder {
public:
    ToleranceLadder(double eps1, double ratio);

    double eps(int level) const;
    double eps1() const { return eps1_; }
    double ratio() const { return ratio_; }
    /// Ladder index whose tolerance is closest (in log scale) to eps1 * factor.
    int level_for_scale(double factor) const;

private:
    double eps1_;
    double ratio_;
};

/// Per-coordinate state of a cell.
struct CoordTrack {
    double x_start = 0.0;
    double x_end = 0.0;
    double lower = 0.0;        // L-down: lower bound on the running minimum
    double inner_lower = 0.0;  // L-up: the minimum is at most this value
    double inner_upper = 0.0;  // U-down: the maximum is at least this value
    double upper = 0.0;        // U-up: upper bound on the running maximum
};

struct Box {
    Point lower;
    Point upper;

    std::size_t dim() const { return lower.size(); }
    bool intersects(const Box& other) const;
    bool contains(const Box& other) const;
    bool contains(const Point& p) const;
};

struct Cell {
    double t_start = 0.0;
    double t_end = 0.0;
    int level = 1;
    boost::container::small_vector<CoordTrack, 2> coords;

    std::size_t dim() const { return coords.size(); }
    Point x_start() const;
    Point x_end() const;
    Box box() const;
    Point midpoint() const;
    /// Largest per-coordinate box width (sup-norm diameter).
    double diameter() const;
};

/// Constraining box of a cell.
inline Box box(const Cell& cell) { return cell.box(); }

class IncompatibleSkeletons : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Skeleton {
public:
    Skeleton() = default;
    explicit Skeleton(std::vector<Cell> cells);

    bool empty() const { return cells_.empty(); }
    std::size_t size() const { return cells_.size(); }
    const std::vector<Cell>& cells() const { return cells_; }
    const Cell& operator[](std::size_t k) const { return cells_[k]; }
    const Cell& front() const { return cells_.front(); }
    const Cell& back() const { return cells_.back(); }

    double span_start() const;
    double span_end() const;
    Point terminal() const { return cells_.back().x_end(); }

    /// Cells [first, last) as a skeleton; first >= last gives the empty skeleton.
    Skeleton sub(std::size_t first, std::size_t last) const;
    /// Copy with cells [first, last) replaced by `replacement`.
    Skeleton splice(std::size_t first, std::size_t last, const Skeleton& replacement) const;

    /// Checks contiguity of times and shared endpoint values.
    bool well_formed(double tol = 0.0) const;

    friend bool operator==(const Skeleton& a, const Skeleton& b);

private:
    std::vector<Cell> cells_;
};

bool operator==(const Cell& a, const Cell& b);

/// True iff the last box of s1 meets the first box of s2. Empty skeletons are
/// compatible with everything.
bool compatible(const Skeleton& s1, const Skeleton& s2);

/// s1 followed by s2; the empty skeleton is a two-sided identity.
Skeleton concat(const Skeleton& s1, const Skeleton& s2);

/// Piecewise-constant, left-continuous path value: the box midpoint of the
/// cell whose [t_k, t_{k+1}) contains u, or the last cell's at the right end.
Point evaluate(const Skeleton& s, double u);

/// Index of the cell used by evaluate().
std::size_t cell_index_at(const Skeleton& s, double u);

/// Line-oriented text form: a header line "skeleton <dim> <cells>" followed
/// by one record per cell.
void write_skeleton(std::ostream& os, const Skeleton& s);
Skeleton read_skeleton(std::istream& is);
std::string to_text(const Skeleton& s);
Skeleton from_text(const std::string& text);

}  // namespace esplit
