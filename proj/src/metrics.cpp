#include "tse/metrics.hpp"

#include <cmath>
#include <sstream>

#include "tse/objective.hpp"

namespace tse {

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os.precision(9);
    os << "city: " << city << "\n";
    os << "snapshots: " << snapshots << "\n";
    os << "core_rows: " << core_rows << "\n";
    os << "core_ignored: " << core_ignored << "\n";
    os << "core_loss: " << core_loss << "\n";
    os << "extended_rows: " << extended_rows << "\n";
    os << "extended_mae: " << extended_mae << "\n";
    os << "stage1_month_accuracy: " << month.accuracy << "\n";
    os << "stage1_month_mad: " << month.mad << "\n";
    os << "stage1_dow_accuracy: " << day_of_week.accuracy << "\n";
    os << "stage1_dow_mad: " << day_of_week.mad << "\n";
    os << "stage1_slot_accuracy: " << slot.accuracy << "\n";
    os << "stage1_slot_mad: " << slot.mad << "\n";
    return os.str();
}

double core_metric(const std::vector<double>& probabilities,
                   const std::vector<double>& labels,
                   const std::vector<double>& class_weights, double epsilon) {
    return gbdt::masked_loss(probabilities, labels, class_weights, epsilon);
}

double extended_metric(const std::vector<double>& predicted_etas,
                       const std::vector<double>& true_etas) {
    if (predicted_etas.size() != true_etas.size())
        fail("validation", "prediction and truth differ in length");
    if (predicted_etas.empty()) fail("validation", "empty eta evaluation set");
    double sum = 0;
    for (size_t i = 0; i < predicted_etas.size(); ++i)
        sum += std::fabs(predicted_etas[i] - true_etas[i]);
    return sum / static_cast<double>(predicted_etas.size());
}

namespace {
double cyclic_distance(int a, int b, int period) {
    int d = std::abs(a - b) % period;
    return static_cast<double>(std::min(d, period - d));
}
}  // namespace

std::array<Stage1Score, 3> stage1_metric(const std::vector<TimeContext>& predicted,
                                         const std::vector<TimeContext>& truth) {
    if (predicted.size() != truth.size())
        fail("validation", "prediction and truth differ in length");
    if (predicted.empty()) fail("validation", "empty context evaluation set");

    std::array<Stage1Score, 3> out{};
    const double n = static_cast<double>(predicted.size());
    for (size_t i = 0; i < predicted.size(); ++i) {
        const TimeContext& p = predicted[i];
        const TimeContext& t = truth[i];
        out[0].accuracy += p.month == t.month;
        out[0].mad += cyclic_distance(p.month, t.month, 12);
        out[1].accuracy += p.day_of_week == t.day_of_week;
        out[1].mad += cyclic_distance(p.day_of_week, t.day_of_week, 7);
        out[2].accuracy += p.slot == t.slot;
        out[2].mad += cyclic_distance(p.slot, t.slot, kSlotsPerDay);
    }
    for (auto& s : out) {
        s.accuracy /= n;
        s.mad /= n;
    }
    return out;
}

}  // namespace tse
