#ifndef PSD_SENSE_ID_H_
#define PSD_SENSE_ID_H_

#include <compare>
#include <functional>
#include <string>
#include <string_view>

namespace psd {

// A TPP sense label such as "4(3)" or "3(1b)": the integer outside the
// parentheses is the super-sense, the bracketed part the specific sense.
class SenseId {
 public:
  SenseId() = default;

  // Throws ParseError naming `raw` when it is not `<digits>(<alnum>)`.
  static SenseId Parse(std::string_view raw);

  int super_sense() const { return super_sense_; }
  const std::string& sub_label() const { return sub_label_; }
  const std::string& raw() const { return raw_; }
  std::string Render() const { return raw_; }

  friend bool operator==(const SenseId& a, const SenseId& b) {
    return a.raw_ == b.raw_;
  }
  // Numeric super-sense, then numeric sub-sense prefix, then suffix:
  // 2(1) < 2(1a) < 2(10) < 10(1).
  friend std::strong_ordering operator<=>(const SenseId& a, const SenseId& b);

 private:
  SenseId(int super_sense, std::string sub_label);

  int super_sense_ = 0;
  std::string sub_label_;
  std::string raw_;
};

}  // namespace psd

template <>
struct std::hash<psd::SenseId> {
  size_t operator()(const psd::SenseId& s) const noexcept {
    return std::hash<std::string>()(s.raw());
  }
};

#endif  // PSD_SENSE_ID_H_
