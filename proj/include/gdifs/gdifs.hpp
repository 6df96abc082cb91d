#pragma once

#include "gdifs/approximator.hpp"
#include "gdifs/certificate.hpp"
#include "gdifs/combinatorics.hpp"
#include "gdifs/config.hpp"
#include "gdifs/dimension.hpp"
#include "gdifs/errors.hpp"
#include "gdifs/geometry.hpp"
#include "gdifs/graph.hpp"
#include "gdifs/group.hpp"
#include "gdifs/log_ratio.hpp"
#include "gdifs/parallel.hpp"
#include "gdifs/render.hpp"
#include "gdifs/separation.hpp"
#include "gdifs/sft.hpp"
