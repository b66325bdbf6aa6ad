#pragma once

#include "sfc/common.hpp"
#include "sfc/config.hpp"
#include "sfc/environment.hpp"
#include "sfc/evaluation.hpp"
#include "sfc/nn.hpp"
#include "sfc/oracle.hpp"
#include "sfc/pipeline.hpp"
#include "sfc/policy.hpp"
#include "sfc/topology.hpp"
#include "sfc/training.hpp"
