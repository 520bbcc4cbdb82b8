#pragma once

#include "mmcsr/bicubic.hpp"
#include "mmcsr/core.hpp"
#include "mmcsr/eval.hpp"
#include "mmcsr/linops.hpp"
#include "mmcsr/optflow.hpp"
#include "mmcsr/pdsolve.hpp"
#include "mmcsr/prox.hpp"
#include "mmcsr/superres.hpp"
