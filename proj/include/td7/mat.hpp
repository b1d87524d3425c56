#pragma once

#include <cassert>
#include <cstring>
#include <vector>

namespace td7 {

// Row-major matrix of scalars; rows are batch entries, cols are features.
template <class T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(size_t(r) * c, T(0)) {}

    T* row(int r) { return d.data() + size_t(r) * cols; }
    const T* row(int r) const { return d.data() + size_t(r) * cols; }

    T& operator()(int r, int c) { return d[size_t(r) * cols + c]; }
    T operator()(int r, int c) const { return d[size_t(r) * cols + c]; }

    void resize(int r, int c) {
        rows = r;
        cols = c;
        d.assign(size_t(r) * c, T(0));
    }

    void zero() { std::memset(d.data(), 0, d.size() * sizeof(T)); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// out = [a | b] column-wise.
template <class T>
void hconcat(const Mat<T>& a, const Mat<T>& b, Mat<T>& out) {
    assert(a.rows == b.rows);
    out.resize(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
        std::memcpy(out.row(r), a.row(r), a.cols * sizeof(T));
        std::memcpy(out.row(r) + a.cols, b.row(r), b.cols * sizeof(T));
    }
}

template <class T>
void hconcat3(const Mat<T>& a, const Mat<T>& b, const Mat<T>& c, Mat<T>& out) {
    assert(a.rows == b.rows && b.rows == c.rows);
    out.resize(a.rows, a.cols + b.cols + c.cols);
    for (int r = 0; r < a.rows; ++r) {
        T* dst = out.row(r);
        std::memcpy(dst, a.row(r), a.cols * sizeof(T));
        std::memcpy(dst + a.cols, b.row(r), b.cols * sizeof(T));
        std::memcpy(dst + a.cols + b.cols, c.row(r), c.cols * sizeof(T));
    }
}

}  // namespace td7
