import pandas as pd
frame = pd.DataFrame()
