#include <Eigen/Dense>
#include <set>

#include "kwfp/eval.hpp"

namespace kwfp {

namespace {
constexpr double kResidualTol = 1e-10;
constexpr int kMaxIterations = 10000;
}  // namespace

Matrix lda_project(const Matrix& X, std::span<const int> y, int out_dims) {
    if (X.rows != y.size()) throw UsageError("lda_project: X and y row counts differ");
    if (X.rows == 0) throw UsageError("lda_project: no samples");

    std::set<int> classes(y.begin(), y.end());
    const int n_classes = static_cast<int>(classes.size());
    if (n_classes < 2) throw ValidationError("lda_project: need at least 2 classes");
    const int d = static_cast<int>(X.cols);
    if (out_dims < 1 || out_dims > n_classes - 1 || out_dims > d)
        throw UsageError("lda_project: out_dims must be in [1, min(classes-1, features)]");

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Xm(
        X.data.data(), static_cast<Eigen::Index>(X.rows), d);

    Eigen::VectorXd global_mean = Xm.colwise().mean();
    Eigen::MatrixXd Sw = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd Sb = Eigen::MatrixXd::Zero(d, d);

    for (int cls : classes) {
        std::vector<Eigen::Index> rows;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) rows.push_back(static_cast<Eigen::Index>(i));
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (Eigen::Index r : rows) mean += Xm.row(r).transpose();
        mean /= static_cast<double>(rows.size());
        for (Eigen::Index r : rows) {
            Eigen::VectorXd diff = Xm.row(r).transpose() - mean;
            Sw += diff * diff.transpose();
        }
        Eigen::VectorXd between = mean - global_mean;
        Sb += static_cast<double>(rows.size()) * (between * between.transpose());
    }

    double ridge = 1e-6 * Sw.trace() / static_cast<double>(d);
    if (ridge <= 0) ridge = 1e-6;
    Sw += ridge * Eigen::MatrixXd::Identity(d, d);

    Eigen::LLT<Eigen::MatrixXd> llt(Sw);
    if (llt.info() != Eigen::Success)
        throw ValidationError("lda_project: within-class scatter not positive definite");

    auto apply_m = [&](const Eigen::MatrixXd& q) -> Eigen::MatrixXd {
        return llt.solve(Sb * q);
    };

    // Orthogonal iteration on Sw^-1 Sb for the dominant subspace.
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(d, out_dims);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        Eigen::MatrixXd Z = apply_m(Q);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
        Eigen::MatrixXd Qn = qr.householderQ() * Eigen::MatrixXd::Identity(d, out_dims);
        double residual = (Qn - Q * (Q.transpose() * Qn)).norm();
        double scale = std::max(1.0, Qn.norm());
        Q = Qn;
        if (residual / scale < kResidualTol) break;
    }

    // Eigenvectors of the small projected operator give the actual
    // discriminant directions inside the converged subspace.
    Eigen::MatrixXd B = Q.transpose() * apply_m(Q);
    Eigen::EigenSolver<Eigen::MatrixXd> es(B);
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < out_dims; ++i)
        order.push_back({es.eigenvalues()[i].real(), i});
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    Eigen::MatrixXd W(d, out_dims);
    for (int j = 0; j < out_dims; ++j) {
        Eigen::VectorXd v = Q * es.eigenvectors().col(order[j].second).real();
        double norm = v.norm();
        if (norm > 0) v /= norm;
        for (int i = 0; i < d; ++i) {  // canonical sign: first nonzero loading positive
            if (v[i] != 0.0) {
                if (v[i] < 0) v = -v;
                break;
            }
        }
        W.col(j) = v;
    }

    Eigen::MatrixXd centered = Xm.rowwise() - global_mean.transpose();
    Eigen::MatrixXd proj = centered * W;
    Matrix out(X.rows, static_cast<size_t>(out_dims));
    for (size_t r = 0; r < X.rows; ++r)
        for (int c = 0; c < out_dims; ++c)
            out.at(r, static_cast<size_t>(c)) = proj(static_cast<Eigen::Index>(r), c);
    return out;
}

}  // namespace kwfp
