#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "seqcl/tape.hpp"

namespace test_helpers {

// Self-cleaning unique temp directory.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("seqcl_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Bitwise equality for Eigen expressions.
template <class A, class B>
bool bits_equal(const A& a, const B& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return (a.array() == b.array()).all();
}

// Central finite differences against analytic gradients.
// `loss` recomputes the scalar objective from the current parameter values;
// `grads` holds one analytic gradient per parameter tensor.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "tensor(i,j)"
};

inline GradCheckResult finite_diff_check(
    const std::vector<std::pair<std::string, seqcl::nn::Mat<double>*>>& params,
    const std::vector<seqcl::nn::Mat<double>>& grads,
    const std::function<double()>& loss, double eps = 1e-4) {
    GradCheckResult result;
    for (size_t p = 0; p < params.size(); ++p) {
        seqcl::nn::Mat<double>& mat = *params[p].second;
        for (Eigen::Index i = 0; i < mat.rows(); ++i) {
            for (Eigen::Index j = 0; j < mat.cols(); ++j) {
                double orig = mat(i, j);
                mat(i, j) = orig + eps;
                double lp = loss();
                mat(i, j) = orig - eps;
                double lm = loss();
                mat(i, j) = orig;
                double fd = (lp - lm) / (2.0 * eps);
                double an = grads[p](i, j);
                double denom = std::max(1e-6, std::abs(fd) + std::abs(an));
                double rel = std::abs(fd - an) / denom;
                if (rel > result.max_rel_err) {
                    result.max_rel_err = rel;
                    result.worst = params[p].first + "(" + std::to_string(i) + "," +
                                   std::to_string(j) + ")";
                }
            }
        }
    }
    return result;
}

}  // namespace test_helpers
