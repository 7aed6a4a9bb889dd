// Copyright 2026 msrf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "msrf/image.hpp"

namespace msrf {

// 10*log10(1/MSE) over all three channels jointly; identical images give
// +infinity.
double psnr(const Image& a, const Image& b);

// Mean local SSIM on the channel-mean grayscale, 11x11 Gaussian window
// sigma = 1.5, C1 = 0.01^2, C2 = 0.03^2 on a [0,1] range.
double ssim(const Image& a, const Image& b);

}  // namespace msrf
