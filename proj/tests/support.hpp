#pragma once

#include "kdvlab/sampledata.hpp"

namespace kdvlab::testsupport {
using namespace kdvlab::sampledata;
}  // namespace kdvlab::testsupport
