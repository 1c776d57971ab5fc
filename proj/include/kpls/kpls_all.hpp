#pragma once

#include "data.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "intervals.hpp"
#include "kernels.hpp"
#include "kpls.hpp"
#include "linalg.hpp"
#include "model_io.hpp"
#include "modelsel.hpp"
#include "parallel.hpp"
#include "sensitivity.hpp"
